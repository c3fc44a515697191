// Per-figure-kind input schemas matching the bscsim harness CSVs.

import { Table } from './csv';

export const KINDS = [
  'ce_validation',
  'sweep_lines',
  'contour',
  'iteration_bars',
  'deviation_bars',
  'comparison_bars',
] as const;

export type FigureKind = (typeof KINDS)[number];

const FIXED_COLUMNS: Record<string, string[]> = {
  ce_validation: [
    'snr_db',
    'sum_rx_power_lse_uar',
    'sum_rx_power_lse_nouar',
    'sum_rx_power_perfect',
    'sum_rx_power_isotropic',
  ],
  contour: ['tau_c0', 'tau_ck', 'min_rate_mean'],
};

// Kinds built from the per-design sweep columns require the shared sweep
// fields plus at least one design column with the given suffix.
const SUFFIX_KINDS: Record<string, string> = {
  sweep_lines: '_min_rate_mean',
  iteration_bars: '_iterations_mean',
  deviation_bars: '_sigma_r_mean',
  comparison_bars: '_min_rate_mean',
};

export function designColumns(table: Table, suffix: string): string[] {
  return table.columns.filter((c) => c.endsWith(suffix));
}

export function validateSchema(kind: FigureKind, table: Table): void {
  if (!KINDS.includes(kind)) {
    throw new Error(`unknown figure kind: ${kind}`);
  }
  const fixed = FIXED_COLUMNS[kind];
  if (fixed) {
    for (const col of fixed) {
      if (!table.columns.includes(col)) {
        throw new Error(`missing column: ${col}`);
      }
    }
    return;
  }
  const suffix = SUFFIX_KINDS[kind];
  for (const col of ['parameter', 'value']) {
    if (!table.columns.includes(col)) {
      throw new Error(`missing column: ${col}`);
    }
  }
  if (designColumns(table, suffix).length === 0) {
    throw new Error(`missing column: *${suffix}`);
  }
}
