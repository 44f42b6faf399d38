// Minimal deterministic SVG assembly: plain strings, fixed precision, no
// timestamps or randomness, so identical inputs produce identical bytes.

export const WIDTH = 900;
export const HEIGHT = 520;
export const MARGIN = { top: 40, right: 30, bottom: 50, left: 70 };

export function fmt(v: number): string {
  return v.toFixed(2);
}

export class Svg {
  private parts: string[] = [];

  constructor(private width = WIDTH, private height = HEIGHT) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  raw(s: string): void {
    this.parts.push(s);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash = ''): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : '';
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${width}"${d}/>`,
    );
  }

  path(points: [number, number][], stroke: string, width = 1.5, fill = 'none', opacity = 1): void {
    if (points.length === 0) return;
    const d = points.map(([x, y], i) => `${i === 0 ? 'M' : 'L'}${fmt(x)} ${fmt(y)}`).join(' ');
    this.parts.push(
      `<path d="${d}" stroke="${stroke}" stroke-width="${width}" fill="${fill}" ` +
        `opacity="${opacity}"/>`,
    );
  }

  polygon(points: [number, number][], stroke: string, fill: string, opacity: number): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(' ');
    this.parts.push(
      `<polygon points="${pts}" stroke="${stroke}" fill="${fill}" opacity="${opacity}"/>`,
    );
  }

  text(x: number, y: number, content: string, size = 12, anchor = 'start', fill = '#222'): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" text-anchor="${anchor}" ` +
        `fill="${fill}">${escapeXml(content)}</text>`,
    );
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${fmt(r)}" fill="${fill}"/>`);
  }

  render(): string {
    return this.parts.join('\n') + '\n</svg>\n';
  }
}

export function escapeXml(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

export interface Scale {
  toPx(v: number): number;
}

export function linearScale(lo: number, hi: number, pxLo: number, pxHi: number): Scale {
  const span = hi - lo || 1;
  return { toPx: (v: number) => pxLo + ((v - lo) / span) * (pxHi - pxLo) };
}

export const SERIES_COLORS = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b'];
