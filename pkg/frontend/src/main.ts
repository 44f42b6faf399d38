// CLI entry point: renders the figures from exported kpi.csv / summary.csv
// files into an output directory. Long-form flags only.
//
//   node dist/main.js fan      --kpi A.csv [--kpi-b B.csv] --phase emergency --out-dir figures
//   node dist/main.js timeline --kpi A.csv [--kpi-b B.csv] --ues 4,14 --out-dir figures
//   node dist/main.js radar    --summary-a A.csv --summary-b B.csv --out-dir figures
//   node dist/main.js flows    --kpi A.csv --out-dir figures

import * as fs from 'fs';
import * as path from 'path';

import { CsvFormatError, parseKpiCsv, parseSummaryCsv } from './csv.js';
import { renderPercentileFan } from './fan.js';
import { renderCellFlows } from './flows.js';
import { MetricKeyError, renderRadar } from './radar.js';
import { renderUeTimeline, UnknownUeError } from './timeline.js';

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith('--') || argv[i + 1] === undefined) {
      throw new Error(`malformed flag pair near ${argv[i]}`);
    }
    flags.set(argv[i].slice(2), argv[i + 1]);
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const v = flags.get(name);
  if (v === undefined) throw new Error(`missing required flag --${name}`);
  return v;
}

function writeFigure(outDir: string, name: string, svg: string): void {
  fs.mkdirSync(outDir, { recursive: true });
  const file = path.join(outDir, name);
  fs.writeFileSync(file, svg);
  console.log(`wrote ${file}`);
}

export function run(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    const flags = parseFlags(rest);
    const outDir = flags.get('out-dir') ?? 'figures';
    if (command === 'fan') {
      const inputs = [{ label: flags.get('label') ?? 'run A', rows: parseKpiCsv(required(flags, 'kpi')) }];
      if (flags.has('kpi-b')) {
        inputs.push({ label: flags.get('label-b') ?? 'run B', rows: parseKpiCsv(flags.get('kpi-b')!) });
      }
      const phase = required(flags, 'phase');
      writeFigure(outDir, `fan-${phase}.svg`, renderPercentileFan(inputs, phase));
      return 0;
    }
    if (command === 'timeline') {
      const inputs = [{ label: flags.get('label') ?? 'run A', rows: parseKpiCsv(required(flags, 'kpi')) }];
      if (flags.has('kpi-b')) {
        inputs.push({ label: flags.get('label-b') ?? 'run B', rows: parseKpiCsv(flags.get('kpi-b')!) });
      }
      const ues = required(flags, 'ues').split(',').map(Number);
      writeFigure(outDir, `timeline-ue${ues.join('-')}.svg`, renderUeTimeline(inputs, ues));
      return 0;
    }
    if (command === 'radar') {
      const a = parseSummaryCsv(required(flags, 'summary-a'));
      const b = parseSummaryCsv(required(flags, 'summary-b'));
      writeFigure(outDir, 'radar.svg',
                  renderRadar(a, b, flags.get('label') ?? 'run A', flags.get('label-b') ?? 'run B'));
      return 0;
    }
    if (command === 'flows') {
      const rows = parseKpiCsv(required(flags, 'kpi'));
      writeFigure(outDir, 'flows.svg', renderCellFlows(rows, flags.get('label') ?? 'run A'));
      return 0;
    }
    console.error(`unknown command: ${command ?? '(none)'}`);
    return 2;
  } catch (err) {
    if (err instanceof CsvFormatError || err instanceof UnknownUeError
        || err instanceof MetricKeyError) {
      console.error(String(err.message));
      return 1;
    }
    console.error(String(err));
    return 2;
  }
}

const invokedDirectly = process.argv[1] !== undefined
  && import.meta.url.endsWith(path.basename(process.argv[1]));
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
