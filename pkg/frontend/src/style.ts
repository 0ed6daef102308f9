/** Styling options shared by every chart kind. */

export interface ChartStyle {
  width: number;
  height: number;
  /** Figure title; empty string suppresses it. */
  title: string;
  /** Keep only rows with this preprocess label. */
  preprocess: string;
  /** Keep only rows with this attack label. */
  attack: string;
  /** Strength slice (dB) selected by the heatmap and marked by the curve. */
  psnrDb: number;
}

export const DEFAULT_STYLE: ChartStyle = {
  width: 760,
  height: 480,
  title: "",
  preprocess: "none",
  attack: "none",
  psnrDb: 20,
};

/** Categorical line/series palette (fixed order). */
export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
] as const;

export function seriesColor(index: number): string {
  return PALETTE[index % PALETTE.length]!;
}
