// Capability radar over a fixed, documented axis set common to both runs.
// The renderer does no metric computation: every axis carries the exporter's
// numbers, normalized per axis to max(|a|, |b|).

import { Summary } from './csv.js';
import { formatMetric } from './stats.js';
import { Svg } from './svg.js';

export class MetricKeyError extends Error {}

export const RADAR_AXES: { phase: string; metric: string; label: string }[] = [
  { phase: 'emergency', metric: 'dl_p10_mbps', label: 'emergency DL p10' },
  { phase: 'emergency', metric: 'p90_p10_ratio', label: 'emergency p90/p10' },
  { phase: 'all', metric: 'frac_below_0p10', label: 'outage below 0.10 Mbps' },
  { phase: 'recovery', metric: 'dl_p20_mbps', label: 'recovery DL p20' },
  { phase: 'recovery', metric: 'hotspot_share', label: 'incident-cell share' },
  { phase: 'emergency', metric: 'dwell_p90_s', label: 'emergency dwell p90' },
];

function lookup(summary: Summary, phase: string, metric: string, which: string): number {
  const value = summary.get(phase)?.get(metric);
  if (value === undefined) {
    throw new MetricKeyError(`summary ${which} is missing ${phase}/${metric}`);
  }
  return value;
}

export function renderRadar(summaryA: Summary, summaryB: Summary,
                            labelA = 'run A', labelB = 'run B'): string {
  const size = 560;
  const svg = new Svg(size, size);
  const cx = size / 2;
  const cy = size / 2 + 10;
  const radius = size / 2 - 90;
  svg.text(20, 28, `Capability radar: ${labelA} vs ${labelB}`, 16);

  const n = RADAR_AXES.length;
  const angle = (i: number) => -Math.PI / 2 + (2 * Math.PI * i) / n;
  for (const frac of [0.25, 0.5, 0.75, 1.0]) {
    const ring: [number, number][] = [];
    for (let i = 0; i < n; i += 1) {
      ring.push([cx + radius * frac * Math.cos(angle(i)),
                 cy + radius * frac * Math.sin(angle(i))]);
    }
    svg.polygon(ring, '#ccc', 'none', 1);
  }

  const polys: Record<string, [number, number][]> = { a: [], b: [] };
  RADAR_AXES.forEach(({ phase, metric, label }, i) => {
    const a = lookup(summaryA, phase, metric, 'A');
    const b = lookup(summaryB, phase, metric, 'B');
    const scale = Math.max(Math.abs(a), Math.abs(b)) || 1;
    const fa = Number.isFinite(a) ? Math.abs(a) / scale : 1;
    const fb = Number.isFinite(b) ? Math.abs(b) / scale : 1;
    polys.a.push([cx + radius * fa * Math.cos(angle(i)), cy + radius * fa * Math.sin(angle(i))]);
    polys.b.push([cx + radius * fb * Math.cos(angle(i)), cy + radius * fb * Math.sin(angle(i))]);
    const lx = cx + (radius + 18) * Math.cos(angle(i));
    const ly = cy + (radius + 18) * Math.sin(angle(i));
    const anchor = Math.abs(Math.cos(angle(i))) < 0.3 ? 'middle'
      : Math.cos(angle(i)) > 0 ? 'start' : 'end';
    svg.text(lx, ly, label, 11, anchor);
    svg.text(lx, ly + 12, `${formatMetric(a)} / ${formatMetric(b)}`, 9, anchor, '#666');
  });
  svg.polygon(polys.a, '#1f77b4', '#1f77b4', 0.25);
  svg.polygon(polys.b, '#d62728', '#d62728', 0.25);
  svg.text(20, size - 30, labelA, 12, 'start', '#1f77b4');
  svg.text(20, size - 14, labelB, 12, 'start', '#d62728');
  return svg.render();
}
