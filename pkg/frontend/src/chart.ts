// Line-chart builder shared by the SVG and PNG backends: computes the layout
// once as drawing primitives, so both outputs show the same chart.

import { Series } from './summary';

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  xLog: boolean;
  yLog: boolean;
  width?: number;
  height?: number;
  referenceLine?: { label: string };  // y = x guide (ideal extractor)
}

export interface Primitive {
  kind: 'line' | 'polyline' | 'text' | 'marker';
  cls: string;
  color: string;
  points: Array<[number, number]>;
  text?: string;
  anchor?: 'start' | 'middle' | 'end';
  dashed?: boolean;
}

export interface Chart {
  width: number;
  height: number;
  primitives: Primitive[];
}

export const PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b'];

const MARGIN = { left: 70, right: 160, top: 40, bottom: 55 };

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = (span / count) / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const start = Math.ceil(lo / s) * s;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += s) ticks.push(v);
  return ticks;
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.floor(Math.log10(lo)); e <= Math.ceil(Math.log10(hi)); e++) {
    const v = Math.pow(10, e);
    if (v >= lo / 1.0001 && v <= hi * 1.0001) ticks.push(v);
  }
  return ticks.length >= 2 ? ticks : [lo, hi];
}

export function formatTick(v: number): string {
  if (v === 0) return '0';
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0).replace('+', '');
  return Number(v.toPrecision(3)).toString();
}

export function buildChart(series: Series[], opts: ChartOptions): Chart {
  const width = opts.width ?? 640;
  const height = opts.height ?? 420;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const xs = series.flatMap((s) => s.x);
  const lows = series.flatMap((s) => s.y.map((y, i) => y - s.se[i]));
  const highs = series.flatMap((s) => s.y.map((y, i) => y + s.se[i]));
  if (opts.referenceLine) {
    lows.push(Math.min(...xs));
    highs.push(Math.max(...xs));
  }

  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  let yLo = Math.min(...lows);
  let yHi = Math.max(...highs);
  if (opts.yLog) {
    const positive = series.flatMap((s) => s.y).filter((v) => v > 0);
    yLo = Math.min(...positive) / 1.5;
    yHi = yHi * 1.5;
  } else {
    const pad = 0.05 * (yHi - yLo || 1);
    yLo -= pad;
    yHi += pad;
  }

  const xT = (v: number) => (opts.xLog ? Math.log10(v) : v);
  const yT = (v: number) => (opts.yLog ? Math.log10(Math.max(v, 1e-300)) : v);
  const sx = (v: number) =>
    MARGIN.left + ((xT(v) - xT(xLo)) / (xT(xHi) - xT(xLo) || 1)) * plotW;
  const sy = (v: number) =>
    MARGIN.top + plotH - ((yT(v) - yT(yLo)) / (yT(yHi) - yT(yLo) || 1)) * plotH;

  const prims: Primitive[] = [];
  const axisColor = '#333333';

  prims.push({ kind: 'line', cls: 'axis', color: axisColor, points: [[MARGIN.left, MARGIN.top + plotH], [MARGIN.left + plotW, MARGIN.top + plotH]] });
  prims.push({ kind: 'line', cls: 'axis', color: axisColor, points: [[MARGIN.left, MARGIN.top], [MARGIN.left, MARGIN.top + plotH]] });

  const xTicks = opts.xLog ? logTicks(xLo, xHi) : niceTicks(xLo, xHi);
  for (const t of xTicks) {
    const px = sx(t);
    prims.push({ kind: 'line', cls: 'tick', color: axisColor, points: [[px, MARGIN.top + plotH], [px, MARGIN.top + plotH + 5]] });
    prims.push({ kind: 'text', cls: 'tick-label', color: axisColor, points: [[px, MARGIN.top + plotH + 18]], text: formatTick(t), anchor: 'middle' });
  }
  const yTicks = opts.yLog ? logTicks(yLo, yHi) : niceTicks(yLo, yHi);
  for (const t of yTicks) {
    const py = sy(t);
    prims.push({ kind: 'line', cls: 'tick', color: axisColor, points: [[MARGIN.left - 5, py], [MARGIN.left, py]] });
    prims.push({ kind: 'text', cls: 'tick-label', color: axisColor, points: [[MARGIN.left - 8, py + 4]], text: formatTick(t), anchor: 'end' });
    prims.push({ kind: 'line', cls: 'grid', color: '#dddddd', points: [[MARGIN.left, py], [MARGIN.left + plotW, py]] });
  }

  prims.push({ kind: 'text', cls: 'title', color: axisColor, points: [[width / 2, 22]], text: opts.title, anchor: 'middle' });
  prims.push({ kind: 'text', cls: 'x-label', color: axisColor, points: [[MARGIN.left + plotW / 2, height - 12]], text: opts.xLabel, anchor: 'middle' });
  prims.push({ kind: 'text', cls: 'y-label', color: axisColor, points: [[14, MARGIN.top - 14]], text: opts.yLabel, anchor: 'start' });

  if (opts.referenceLine) {
    prims.push({
      kind: 'polyline', cls: 'reference', color: '#777777', dashed: true,
      points: [[sx(xLo), sy(xLo)], [sx(xHi), sy(xHi)]],
    });
  }

  series.forEach((s, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    for (let i = 0; i < s.x.length; i++) {
      if (s.se[i] > 0) {
        prims.push({
          kind: 'line', cls: 'errorbar', color,
          points: [[sx(s.x[i]), sy(s.y[i] - s.se[i])], [sx(s.x[i]), sy(s.y[i] + s.se[i])]],
        });
      }
    }
    prims.push({
      kind: 'polyline', cls: 'series', color,
      points: s.x.map((x, i) => [sx(x), sy(s.y[i])]),
    });
    for (let i = 0; i < s.x.length; i++) {
      prims.push({ kind: 'marker', cls: 'marker', color, points: [[sx(s.x[i]), sy(s.y[i])]] });
    }
  });

  // legend
  let ly = MARGIN.top + 8;
  const lx = MARGIN.left + plotW + 14;
  series.forEach((s, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    prims.push({ kind: 'line', cls: 'legend-line', color, points: [[lx, ly], [lx + 22, ly]] });
    prims.push({ kind: 'text', cls: 'legend-label', color: axisColor, points: [[lx + 28, ly + 4]], text: s.name, anchor: 'start' });
    ly += 18;
  });
  if (opts.referenceLine) {
    prims.push({ kind: 'line', cls: 'legend-line', color: '#777777', dashed: true, points: [[lx, ly], [lx + 22, ly]] });
    prims.push({ kind: 'text', cls: 'legend-label', color: axisColor, points: [[lx + 28, ly + 4]], text: opts.referenceLine.label, anchor: 'start' });
  }

  return { width, height, primitives: prims };
}

export function chartToSvg(chart: Chart): string {
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${chart.width}" height="${chart.height}" viewBox="0 0 ${chart.width} ${chart.height}">`,
  );
  parts.push(`<rect width="${chart.width}" height="${chart.height}" fill="white"/>`);
  for (const p of chart.primitives) {
    const dash = p.dashed ? ' stroke-dasharray="6 4"' : '';
    if (p.kind === 'line') {
      const [[x1, y1], [x2, y2]] = p.points;
      parts.push(
        `<line class="${p.cls}" x1="${r(x1)}" y1="${r(y1)}" x2="${r(x2)}" y2="${r(y2)}" stroke="${p.color}" stroke-width="1"${dash}/>`,
      );
    } else if (p.kind === 'polyline') {
      const pts = p.points.map(([x, y]) => `${r(x)},${r(y)}`).join(' ');
      parts.push(
        `<polyline class="${p.cls}" points="${pts}" fill="none" stroke="${p.color}" stroke-width="1.6"${dash}/>`,
      );
    } else if (p.kind === 'marker') {
      const [[x, y]] = p.points;
      parts.push(`<circle class="${p.cls}" cx="${r(x)}" cy="${r(y)}" r="3" fill="${p.color}"/>`);
    } else {
      const [[x, y]] = p.points;
      const anchor = p.anchor ?? 'start';
      parts.push(
        `<text class="${p.cls}" x="${r(x)}" y="${r(y)}" fill="${p.color}" font-family="sans-serif" font-size="12" text-anchor="${anchor}">${escapeXml(p.text ?? '')}</text>`,
      );
    }
  }
  parts.push('</svg>');
  return parts.join('\n') + '\n';
}

function r(v: number): string {
  return (Math.round(v * 100) / 100).toString();
}

function escapeXml(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}
