// Nearest-rank percentile, matching the exporter's convention exactly:
// sort ascending, take element ceil(q * n), 1-based, clamped to [1, n].

export function percentile(values: number[], q: number): number {
  if (values.length === 0) {
    throw new Error('percentile of empty list');
  }
  const ordered = [...values].sort((a, b) => a - b);
  const rank = Math.min(Math.max(Math.ceil(q * ordered.length), 1), ordered.length);
  return ordered[rank - 1];
}

export function formatMetric(value: number): string {
  return Number.isFinite(value) ? value.toFixed(6) : 'inf';
}
