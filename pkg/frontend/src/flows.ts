// Cell-flow diagram: handover counts between cells drawn as arcs on a ring,
// arrow width proportional to the count.

import { KpiRow } from './csv.js';
import { Svg, fmt } from './svg.js';

export function renderCellFlows(rows: KpiRow[], label: string): string {
  const size = 560;
  const svg = new Svg(size, size);
  const cx = size / 2;
  const cy = size / 2 + 10;
  const radius = size / 2 - 80;
  svg.text(20, 28, `Handover flows: ${label}`, 16);

  const cells = [...new Set(rows.filter((r) => r.record === 'cell' && r.cellId !== null)
    .map((r) => r.cellId as number))].sort((a, b) => a - b);
  const counts = new Map<string, number>();
  for (const row of rows) {
    if (row.record !== 'ho' || row.hoFrom === null || row.hoTo === null) continue;
    const key = `${row.hoFrom}>${row.hoTo}`;
    counts.set(key, (counts.get(key) ?? 0) + 1);
  }
  const pos = new Map<number, [number, number]>();
  cells.forEach((cell, i) => {
    const a = -Math.PI / 2 + (2 * Math.PI * i) / cells.length;
    pos.set(cell, [cx + radius * Math.cos(a), cy + radius * Math.sin(a)]);
  });
  const maxCount = Math.max(...counts.values(), 1);
  for (const [key, count] of [...counts.entries()].sort()) {
    const [frm, to] = key.split('>').map(Number);
    const [x1, y1] = pos.get(frm) ?? [cx, cy];
    const [x2, y2] = pos.get(to) ?? [cx, cy];
    const mx = (x1 + x2) / 2 + (cy - (y1 + y2) / 2) * 0.25;
    const my = (y1 + y2) / 2 + ((x1 + x2) / 2 - cx) * 0.25;
    const width = 0.5 + 4 * (count / maxCount);
    svg.raw(`<path d="M${fmt(x1)} ${fmt(y1)} Q${fmt(mx)} ${fmt(my)} ${fmt(x2)} ${fmt(y2)}" ` +
            `stroke="#1f77b4" stroke-width="${fmt(width)}" fill="none" opacity="0.6"/>`);
    svg.circle(x2 + (mx - x2) * 0.08, y2 + (my - y2) * 0.08, 1.5 + width / 2, '#1f77b4');
  }
  for (const cell of cells) {
    const [x, y] = pos.get(cell)!;
    svg.circle(x, y, 14, '#eee');
    svg.raw(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="14" stroke="#222" fill="none"/>`);
    svg.text(x, y + 4, String(cell), 12, 'middle');
  }
  return svg.render();
}
