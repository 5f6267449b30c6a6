// CLI: plot --figure <id> --in <summary.csv> --out <image> [--format svg|png]
//
// Renders one figure per experiment summary: an error-bar line chart with one
// series per scheme; the extractor figure adds the ideal achieved = desired
// reference line.

import * as fs from 'fs';
import { buildChart, chartToSvg, ChartOptions } from './chart';
import { chartToPng } from './raster';
import { parseSummary, seriesFromSummary, Series } from './summary';

export const FIGURES = [
  'extractors',
  'gap_vs_epsilon',
  'gap_vs_snr',
  'gap_vs_T',
  'gap_vs_N',
] as const;

export type FigureId = (typeof FIGURES)[number];

export interface FigureSpec {
  figureId: FigureId;
  inPath: string;
  outPath: string;
  format: 'svg' | 'png';
}

interface FigureStyle {
  metric: 'gap' | 'eps';
  title: string;
  xLabel: string;
  yLabel: string;
  xLog: boolean;
  yLog: boolean;
  referenceLine?: { label: string };
}

const STYLES: Record<FigureId, FigureStyle> = {
  extractors: {
    metric: 'eps',
    title: 'Average achieved privacy at the server',
    xLabel: 'desired epsilon',
    yLabel: 'achieved epsilon',
    xLog: false,
    yLog: false,
    referenceLine: { label: 'ideal (achieved = desired)' },
  },
  gap_vs_epsilon: {
    metric: 'gap',
    title: 'Normalized optimality gap vs privacy level',
    xLabel: 'epsilon',
    yLabel: 'normalized gap',
    xLog: false,
    yLog: true,
  },
  gap_vs_snr: {
    metric: 'gap',
    title: 'Normalized optimality gap vs SNR',
    xLabel: 'SNR (dB)',
    yLabel: 'normalized gap',
    xLog: false,
    yLog: true,
  },
  gap_vs_T: {
    metric: 'gap',
    title: 'Normalized optimality gap vs training rounds',
    xLabel: 'rounds',
    yLabel: 'normalized gap',
    xLog: false,
    yLog: true,
  },
  gap_vs_N: {
    metric: 'gap',
    title: 'Normalized optimality gap vs receive antennas',
    xLabel: 'antennas',
    yLabel: 'normalized gap',
    xLog: false,
    yLog: true,
  },
};

export function renderFigure(spec: FigureSpec): Buffer {
  const style = STYLES[spec.figureId];
  if (!style) {
    throw new Error(`unknown figure id "${spec.figureId}"`);
  }
  const rows = parseSummary(fs.readFileSync(spec.inPath, 'utf8'));
  const series = seriesFromSummary(rows, style.metric);
  const opts: ChartOptions = {
    title: style.title,
    xLabel: style.xLabel,
    yLabel: style.yLabel,
    xLog: style.xLog,
    yLog: style.yLog && seriesAllPositive(series),
    referenceLine: style.referenceLine,
  };
  const chart = buildChart(series, opts);
  return spec.format === 'png' ? chartToPng(chart) : Buffer.from(chartToSvg(chart), 'utf8');
}

function seriesAllPositive(series: Series[]): boolean {
  return series.every((s) => s.y.every((v) => v > 0));
}

export function parseArgs(argv: string[]): FigureSpec {
  const get = (flag: string): string | undefined => {
    const i = argv.indexOf(flag);
    return i >= 0 ? argv[i + 1] : undefined;
  };
  const figure = get('--figure');
  const inPath = get('--in');
  const outPath = get('--out');
  const format = (get('--format') ?? 'svg') as 'svg' | 'png';
  if (!figure || !inPath || !outPath) {
    throw new Error('usage: plot --figure <id> --in <summary.csv> --out <image> [--format svg|png]');
  }
  if (!(FIGURES as readonly string[]).includes(figure)) {
    throw new Error(`unknown figure id "${figure}"; expected one of ${FIGURES.join(', ')}`);
  }
  if (format !== 'svg' && format !== 'png') {
    throw new Error(`unknown format "${format}"`);
  }
  return { figureId: figure as FigureId, inPath, outPath, format };
}

export function main(argv: string[]): number {
  try {
    const spec = parseArgs(argv);
    fs.writeFileSync(spec.outPath, renderFigure(spec));
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
