// Headless figure rendering: one echarts option per figure kind, emitted as
// an SVG string via server-side rendering.

import * as echarts from 'echarts';
import { Table, numeric } from './csv';
import { FigureKind, designColumns, validateSchema } from './schema';

export interface FigureSpec {
  kind: FigureKind;
  xlabel?: string;
  ylabel?: string;
  title?: string;
}

const WIDTH = 860;
const HEIGHT = 560;

const CE_CURVES: [string, string][] = [
  ['sum_rx_power_perfect', 'perfect CSI'],
  ['sum_rx_power_lse_nouar', 'LSE, no ambient reflections'],
  ['sum_rx_power_lse_uar', 'LSE, ambient reflections suppressed'],
  ['sum_rx_power_isotropic', 'isotropic'],
];

function designLabel(column: string, suffix: string): string {
  return column.slice(0, -suffix.length);
}

function baseGrid(xlabel: string, ylabel: string, logY: boolean) {
  return {
    animation: false,
    grid: { left: 80, right: 30, top: 60, bottom: 60 },
    legend: { top: 8 },
    xAxis: { type: 'value' as const, name: xlabel, nameLocation: 'middle' as const, nameGap: 30 },
    yAxis: {
      type: (logY ? 'log' : 'value') as 'log' | 'value',
      name: ylabel,
      nameLocation: 'middle' as const,
      nameGap: 60,
    },
  };
}

function ceValidationOption(table: Table, spec: FigureSpec) {
  const snr = numeric(table, 'snr_db');
  return {
    ...baseGrid(spec.xlabel ?? 'backscatter SNR (dB)', spec.ylabel ?? 'sum received power (W)', true),
    series: CE_CURVES.map(([col, label]) => ({
      type: 'line' as const,
      name: label,
      data: numeric(table, col).map((v, i) => [snr[i], v]),
    })),
  };
}

function sweepLinesOption(table: Table, spec: FigureSpec) {
  const parameter = table.rows[0]['parameter'];
  const xs = numeric(table, 'value');
  const cols = designColumns(table, '_min_rate_mean');
  const xlabel = spec.xlabel ?? (parameter === 'snr_db' ? 'average SNR (dB)' : parameter);
  return {
    ...baseGrid(xlabel, spec.ylabel ?? 'max-min rate (bits/s/Hz)', true),
    series: cols.map((col) => ({
      type: 'line' as const,
      name: designLabel(col, '_min_rate_mean'),
      data: numeric(table, col).map((v, i) => [xs[i], v]),
    })),
  };
}

function barsOption(table: Table, suffix: string, spec: FigureSpec, ylabel: string, logY: boolean) {
  const xs = table.rows.map((r) => r['value']);
  const cols = designColumns(table, suffix);
  return {
    animation: false,
    grid: { left: 80, right: 30, top: 60, bottom: 60 },
    legend: { top: 8 },
    xAxis: {
      type: 'category' as const,
      data: xs,
      name: spec.xlabel ?? table.rows[0]['parameter'],
      nameLocation: 'middle' as const,
      nameGap: 30,
    },
    yAxis: {
      type: (logY ? 'log' : 'value') as 'log' | 'value',
      name: spec.ylabel ?? ylabel,
      nameLocation: 'middle' as const,
      nameGap: 60,
    },
    series: cols.map((col) => ({
      type: 'bar' as const,
      name: designLabel(col, suffix),
      data: numeric(table, col),
    })),
  };
}

function contourOption(table: Table, spec: FigureSpec) {
  const c0 = numeric(table, 'tau_c0');
  const ck = numeric(table, 'tau_ck');
  const rate = numeric(table, 'min_rate_mean');
  const c0Levels = [...new Set(c0)].sort((a, b) => a - b);
  const ckLevels = [...new Set(ck)].sort((a, b) => a - b);
  const cells = table.rows.map((_, i) => [
    c0Levels.indexOf(c0[i]),
    ckLevels.indexOf(ck[i]),
    rate[i],
  ]);
  let best = 0;
  rate.forEach((v, i) => {
    if (v > rate[best]) best = i;
  });
  return {
    animation: false,
    grid: { left: 90, right: 90, top: 40, bottom: 60 },
    xAxis: {
      type: 'category' as const,
      data: c0Levels.map(String),
      name: spec.xlabel ?? 'phase (1a) fraction tau_c0',
      nameLocation: 'middle' as const,
      nameGap: 30,
    },
    yAxis: {
      type: 'category' as const,
      data: ckLevels.map(String),
      name: spec.ylabel ?? 'per-tag fraction tau_ck',
      nameLocation: 'middle' as const,
      nameGap: 60,
    },
    visualMap: {
      min: Math.min(...rate),
      max: Math.max(...rate),
      seriesIndex: 0,
      calculable: false,
      orient: 'vertical' as const,
      right: 10,
      top: 'center',
    },
    series: [
      { type: 'heatmap' as const, data: cells, name: 'max-min rate' },
      {
        type: 'scatter' as const,
        name: 'optimum',
        symbol: 'diamond',
        symbolSize: 18,
        itemStyle: { color: '#d0006f' },
        data: [[c0Levels.indexOf(c0[best]), ckLevels.indexOf(ck[best])]],
      },
    ],
  };
}

export function buildOption(table: Table, spec: FigureSpec): object {
  validateSchema(spec.kind, table);
  switch (spec.kind) {
    case 'ce_validation':
      return ceValidationOption(table, spec);
    case 'sweep_lines':
      return sweepLinesOption(table, spec);
    case 'contour':
      return contourOption(table, spec);
    case 'iteration_bars':
      return barsOption(table, '_iterations_mean', spec, 'outer iterations', false);
    case 'deviation_bars':
      return barsOption(table, '_sigma_r_mean', spec, 'rate deviation at termination', false);
    case 'comparison_bars':
      return barsOption(table, '_min_rate_mean', spec, 'max-min rate (bits/s/Hz)', true);
  }
}

export function renderSvg(table: Table, spec: FigureSpec): string {
  const option = buildOption(table, spec);
  const chart = echarts.init(null, null, {
    renderer: 'svg',
    ssr: true,
    width: WIDTH,
    height: HEIGHT,
  });
  try {
    chart.setOption({ ...option, title: spec.title ? { text: spec.title } : undefined });
    return chart.renderToSVGString();
  } finally {
    chart.dispose();
  }
}
