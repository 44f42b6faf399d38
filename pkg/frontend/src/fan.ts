// Percentile fan: per-second p10/p50/p90 of all-UE downlink throughput over
// one phase, one band set per run. The dashed reference lines carry the
// phase-level percentiles so they can be cross-checked against summary.csv.

import { KpiRow } from './csv.js';
import { percentile, formatMetric } from './stats.js';
import { HEIGHT, MARGIN, SERIES_COLORS, Svg, WIDTH, linearScale } from './svg.js';

export interface FanInput {
  label: string;
  rows: KpiRow[];
}

interface Series {
  label: string;
  t: number[];
  p10: number[];
  p50: number[];
  p90: number[];
  phase10: number;
  phase50: number;
  phase90: number;
}

function buildSeries(input: FanInput, phase: string): Series | null {
  const byTick = new Map<number, number[]>();
  const all: number[] = [];
  for (const row of input.rows) {
    if (row.record !== 'ue' || row.phase !== phase || row.pdcpDlMbps === null) continue;
    if (!byTick.has(row.t)) byTick.set(row.t, []);
    byTick.get(row.t)!.push(row.pdcpDlMbps);
    all.push(row.pdcpDlMbps);
  }
  if (all.length === 0) return null;
  const ticks = [...byTick.keys()].sort((a, b) => a - b);
  return {
    label: input.label,
    t: ticks,
    p10: ticks.map((t) => percentile(byTick.get(t)!, 0.1)),
    p50: ticks.map((t) => percentile(byTick.get(t)!, 0.5)),
    p90: ticks.map((t) => percentile(byTick.get(t)!, 0.9)),
    phase10: percentile(all, 0.1),
    phase50: percentile(all, 0.5),
    phase90: percentile(all, 0.9),
  };
}

export function renderPercentileFan(inputs: FanInput[], phase: string): string {
  const svg = new Svg();
  const series = inputs.map((i) => buildSeries(i, phase)).filter((s): s is Series => s !== null);
  svg.text(MARGIN.left, 24, `All-UE DL throughput percentiles, ${phase} phase`, 16);
  if (series.length === 0) {
    svg.text(WIDTH / 2, HEIGHT / 2, `no samples in phase "${phase}"`, 16, 'middle', '#888');
    return svg.render();
  }
  const tLo = Math.min(...series.map((s) => s.t[0]));
  const tHi = Math.max(...series.map((s) => s.t[s.t.length - 1]));
  const vHi = Math.max(...series.map((s) => Math.max(...s.p90))) * 1.05 || 1;
  const right = WIDTH - MARGIN.right - 190; // room for the reference labels
  const x = linearScale(tLo, tHi, MARGIN.left, right);
  const y = linearScale(0, vHi, HEIGHT - MARGIN.bottom, MARGIN.top);

  svg.line(MARGIN.left, HEIGHT - MARGIN.bottom, right, HEIGHT - MARGIN.bottom, '#222');
  svg.line(MARGIN.left, MARGIN.top, MARGIN.left, HEIGHT - MARGIN.bottom, '#222');
  svg.text((MARGIN.left + right) / 2, HEIGHT - 14, 'time (s)', 12, 'middle');
  svg.text(16, MARGIN.top - 10, 'Mbps', 12);

  series.forEach((s, i) => {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    const band: [number, number][] = [];
    for (let k = 0; k < s.t.length; k += 1) {
      band.push([x.toPx(s.t[k]), y.toPx(s.p90[k])]);
    }
    for (let k = s.t.length - 1; k >= 0; k -= 1) {
      band.push([x.toPx(s.t[k]), y.toPx(s.p10[k])]);
    }
    svg.polygon(band, 'none', color, 0.15);
    svg.path(s.t.map((t, k) => [x.toPx(t), y.toPx(s.p50[k])]), color, 2);
    const refs: [string, number][] = [['p10', s.phase10], ['p50', s.phase50], ['p90', s.phase90]];
    refs.forEach(([q, v], j) => {
      svg.line(MARGIN.left, y.toPx(v), right, y.toPx(v), color, 1, '6 4');
      svg.text(right + 6, MARGIN.top + 40 * i + 12 * (j + 1),
               `${s.label} ${q}=${formatMetric(v)}`, 9, 'start', color);
    });
    svg.text(MARGIN.left + 8, MARGIN.top + 16 * (i + 1), s.label, 12, 'start', color);
  });
  return svg.render();
}
