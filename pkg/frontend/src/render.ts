/**
 * Figure rendering: a pure function of (CSV text, plot spec). File IO
 * lives only in render(); renderText() is the testable core.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { boundSweep } from "./charts/boundSweep.js";
import { ChartResult } from "./charts/common.js";
import { matrixHeatmap } from "./charts/matrixHeatmap.js";
import { strengthCurve } from "./charts/strengthCurve.js";
import { parseGrid } from "./schema.js";
import { ChartStyle, DEFAULT_STYLE } from "./style.js";

export const PLOT_KINDS = ["strength-curve", "matrix-heatmap", "bound-sweep"] as const;

export type PlotKind = (typeof PLOT_KINDS)[number];

export interface PlotSpec {
  /** Path of the evaluation-grid CSV to read. */
  csv: string;
  kind: PlotKind;
  /** Path of the SVG file to write. */
  out: string;
  style?: Partial<ChartStyle>;
}

const CHARTS: Record<PlotKind, (rows: ReturnType<typeof parseGrid>, style: ChartStyle) => ChartResult> = {
  "strength-curve": strengthCurve,
  "matrix-heatmap": matrixHeatmap,
  "bound-sweep": boundSweep,
};

export function isPlotKind(value: string): value is PlotKind {
  return (PLOT_KINDS as readonly string[]).includes(value);
}

/** Render CSV text to SVG text. Pure: no clock, no randomness, no IO. */
export function renderText(csvText: string, kind: PlotKind, style?: Partial<ChartStyle>): ChartResult {
  if (!isPlotKind(kind)) {
    throw new Error(`unknown plot kind ${JSON.stringify(kind)}; expected one of ${PLOT_KINDS.join(", ")}`);
  }
  const rows = parseGrid(csvText);
  return CHARTS[kind](rows, { ...DEFAULT_STYLE, ...style });
}

/** Read spec.csv, render, write spec.out; returns the chart result. */
export function render(spec: PlotSpec): ChartResult {
  const csvText = readFileSync(spec.csv, "utf8");
  const result = renderText(csvText, spec.kind, spec.style);
  writeFileSync(spec.out, result.svg, "utf8");
  return result;
}
