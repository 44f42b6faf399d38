// Readers for the two documented export formats: kpi.csv (one row per sample)
// and summary.csv (phase,metric,value).

import * as fs from 'fs';

export const KPI_COLUMNS = [
  'record', 't', 'phase', 'cell_id', 'ue_id', 'prb_dl', 'pdcp_dl_mbps',
  'pdcp_ul_mbps', 'sched_dl_mbps', 'sinr_db', 'rsrp_dbm', 'rsrq_db', 'mcs',
  'ul_interf_dbm', 'attached_ue_count', 'ho_from', 'ho_to',
];

export interface KpiRow {
  record: string;
  t: number;
  phase: string;
  cellId: number | null;
  ueId: number | null;
  pdcpDlMbps: number | null;
  schedDlMbps: number | null;
  hoFrom: number | null;
  hoTo: number | null;
}

export class CsvFormatError extends Error {}

function num(field: string): number | null {
  return field === '' ? null : Number(field);
}

export function parseKpiCsv(path: string): KpiRow[] {
  const text = fs.readFileSync(path, 'utf-8');
  const lines = text.split('\n').filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new CsvFormatError(`${path}: empty file`);
  }
  const header = lines[0].split(',');
  for (const column of KPI_COLUMNS) {
    if (!header.includes(column)) {
      throw new CsvFormatError(`${path}: missing column ${column}`);
    }
  }
  const idx = new Map(header.map((h, i) => [h, i]));
  const col = (parts: string[], name: string) => parts[idx.get(name)!];
  return lines.slice(1).map((line) => {
    const parts = line.split(',');
    return {
      record: col(parts, 'record'),
      t: Number(col(parts, 't')),
      phase: col(parts, 'phase'),
      cellId: num(col(parts, 'cell_id')),
      ueId: num(col(parts, 'ue_id')),
      pdcpDlMbps: num(col(parts, 'pdcp_dl_mbps')),
      schedDlMbps: num(col(parts, 'sched_dl_mbps')),
      hoFrom: num(col(parts, 'ho_from')),
      hoTo: num(col(parts, 'ho_to')),
    };
  });
}

export type Summary = Map<string, Map<string, number>>;

export function parseSummaryCsv(path: string): Summary {
  const text = fs.readFileSync(path, 'utf-8');
  const lines = text.split('\n').filter((l) => l.length > 0);
  if (lines.length === 0 || lines[0] !== 'phase,metric,value') {
    throw new CsvFormatError(`${path}: expected header phase,metric,value`);
  }
  const out: Summary = new Map();
  for (const line of lines.slice(1)) {
    const [phase, metric, value] = line.split(',');
    if (!out.has(phase)) out.set(phase, new Map());
    out.get(phase)!.set(metric, value === 'inf' ? Infinity : Number(value));
  }
  return out;
}

// Phase boundaries recovered from the sample stream, in time order.
export function phaseSpans(rows: KpiRow[]): { name: string; start: number; end: number }[] {
  const spans: { name: string; start: number; end: number }[] = [];
  for (const row of rows) {
    if (row.record === 'ho') continue;
    const last = spans[spans.length - 1];
    if (!last || last.name !== row.phase) {
      if (last) last.end = row.t;
      spans.push({ name: row.phase, start: last ? last.end : 0, end: row.t });
    } else {
      last.end = row.t;
    }
  }
  return spans;
}
