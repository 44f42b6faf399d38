// Per-UE downlink throughput timelines with phase boundaries marked.

import { KpiRow, phaseSpans } from './csv.js';
import { HEIGHT, MARGIN, SERIES_COLORS, Svg, WIDTH, linearScale } from './svg.js';

export class UnknownUeError extends Error {}

export interface TimelineInput {
  label: string;
  rows: KpiRow[];
}

export function renderUeTimeline(inputs: TimelineInput[], ueIds: number[]): string {
  const svg = new Svg();
  svg.text(MARGIN.left, 24, `Per-UE DL throughput: UE ${ueIds.join(', UE ')}`, 16);

  const seriesList: { name: string; t: number[]; v: number[] }[] = [];
  for (const input of inputs) {
    const present = new Set(
      input.rows.filter((r) => r.record === 'ue' && r.ueId !== null).map((r) => r.ueId),
    );
    for (const ue of ueIds) {
      if (!present.has(ue)) {
        throw new UnknownUeError(`ue ${ue} not present in ${input.label}`);
      }
      const rows = input.rows.filter((r) => r.record === 'ue' && r.ueId === ue);
      seriesList.push({
        name: inputs.length > 1 ? `${input.label} ue${ue}` : `ue${ue}`,
        t: rows.map((r) => r.t),
        v: rows.map((r) => r.pdcpDlMbps ?? 0),
      });
    }
  }
  const tHi = Math.max(...seriesList.map((s) => s.t[s.t.length - 1] ?? 0), 1);
  const vHi = Math.max(...seriesList.map((s) => Math.max(...s.v, 0))) * 1.05 || 1;
  const x = linearScale(0, tHi, MARGIN.left, WIDTH - MARGIN.right);
  const y = linearScale(0, vHi, HEIGHT - MARGIN.bottom, MARGIN.top);

  svg.line(MARGIN.left, HEIGHT - MARGIN.bottom, WIDTH - MARGIN.right, HEIGHT - MARGIN.bottom, '#222');
  svg.line(MARGIN.left, MARGIN.top, MARGIN.left, HEIGHT - MARGIN.bottom, '#222');
  svg.text(WIDTH / 2, HEIGHT - 14, 'time (s)', 12, 'middle');
  svg.text(16, MARGIN.top - 10, 'Mbps', 12);

  for (const span of phaseSpans(inputs[0].rows)) {
    if (span.start > 0) {
      svg.line(x.toPx(span.start), MARGIN.top, x.toPx(span.start), HEIGHT - MARGIN.bottom,
               '#999', 1, '4 4');
    }
    svg.text(x.toPx((span.start + span.end) / 2), MARGIN.top - 6, span.name, 11, 'middle', '#666');
  }

  seriesList.forEach((s, i) => {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    svg.path(s.t.map((t, k) => [x.toPx(t), y.toPx(s.v[k])]), color, 1.5);
    svg.text(MARGIN.left + 8, MARGIN.top + 16 * (i + 1), s.name, 12, 'start', color);
  });
  return svg.render();
}
