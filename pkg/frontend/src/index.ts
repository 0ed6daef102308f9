export { CSV_COLUMNS, GridRow, SchemaError, parseGrid } from "./schema.js";
export { ChartStyle, DEFAULT_STYLE } from "./style.js";
export { PLOT_KINDS, PlotKind, PlotSpec, isPlotKind, render, renderText } from "./render.js";
