// Reader for the experiment-summary CSV emitted by `otafl summarize`.

export const SUMMARY_HEADER =
  'scheme,sweep_name,sweep_value,n_trials,n_feasible,gap_mean,gap_se,eps_mean,eps_se';

export interface SummaryRow {
  scheme: string;
  sweepName: string;
  sweepValue: number;
  nTrials: number;
  nFeasible: number;
  gapMean: number;
  gapSe: number;
  epsMean: number;
  epsSe: number;
}

export function parseSummary(text: string): SummaryRow[] {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length === 0 || lines[0].trim() !== SUMMARY_HEADER) {
    throw new Error(
      `summary schema mismatch: expected header "${SUMMARY_HEADER}", got "${lines[0] ?? ''}"`,
    );
  }
  const rows: SummaryRow[] = [];
  for (const line of lines.slice(1)) {
    if (line.trim() === '') continue;
    const parts = line.split(',');
    if (parts.length !== 9) {
      throw new Error(`summary schema mismatch: bad row "${line}"`);
    }
    rows.push({
      scheme: parts[0],
      sweepName: parts[1],
      sweepValue: Number(parts[2]),
      nTrials: Number(parts[3]),
      nFeasible: Number(parts[4]),
      gapMean: Number(parts[5]),
      gapSe: Number(parts[6]),
      epsMean: Number(parts[7]),
      epsSe: Number(parts[8]),
    });
  }
  return rows;
}

export interface Series {
  name: string;
  x: number[];
  y: number[];
  se: number[];
}

// One series per scheme, sorted by sweep value; non-finite points are dropped
// (infeasible sweep cells), empty series are an error.
export function seriesFromSummary(
  rows: SummaryRow[],
  metric: 'gap' | 'eps',
): Series[] {
  const bySchemes = new Map<string, SummaryRow[]>();
  for (const row of rows) {
    const bucket = bySchemes.get(row.scheme) ?? [];
    bucket.push(row);
    bySchemes.set(row.scheme, bucket);
  }
  const series: Series[] = [];
  for (const [name, bucket] of bySchemes) {
    bucket.sort((a, b) => a.sweepValue - b.sweepValue);
    const x: number[] = [];
    const y: number[] = [];
    const se: number[] = [];
    for (const row of bucket) {
      const value = metric === 'gap' ? row.gapMean : row.epsMean;
      const err = metric === 'gap' ? row.gapSe : row.epsSe;
      if (Number.isFinite(value)) {
        x.push(row.sweepValue);
        y.push(value);
        se.push(Number.isFinite(err) ? err : 0);
      }
    }
    if (x.length === 0) {
      throw new Error(`scheme "${name}" has no finite data points`);
    }
    series.push({ name, x, y, se });
  }
  if (series.length === 0) {
    throw new Error('summary contains no series');
  }
  return series;
}
