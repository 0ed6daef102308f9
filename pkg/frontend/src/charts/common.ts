/** Shared pieces for the line-style charts (ordinal strength axis). */

import { GridRow, levelLabel } from "../schema.js";
import { ChartStyle } from "../style.js";
import { Frame, innerHeight, innerWidth, tag, text, tickLabel, ticks } from "../svg.js";

export interface ChartResult {
  svg: string;
  warnings: string[];
}

export function makeFrame(style: ChartStyle): Frame {
  return {
    width: style.width,
    height: style.height,
    left: 64,
    right: 24,
    top: style.title === "" ? 24 : 40,
    bottom: 56,
  };
}

export function filterRows(rows: GridRow[], style: ChartStyle): GridRow[] {
  return rows.filter((r) => r.preprocess === style.preprocess && r.attack === style.attack);
}

/**
 * One strength level after grouping. Recorded strengths are realized
 * means, so rows of the same physical slice can differ by float noise;
 * grouping rounds to 0.01 dB, far below any configured grid spacing.
 */
export interface StrengthLevel {
  key: string;
  value: number;
}

export function levelOf(psnrDb: number): StrengthLevel {
  if (psnrDb === Infinity) return { key: "inf", value: Infinity };
  const value = Math.round(psnrDb * 100) / 100;
  return { key: String(value), value };
}

export function groupedLevels(rows: GridRow[]): StrengthLevel[] {
  const byKey = new Map<string, StrengthLevel>();
  for (const row of rows) {
    const level = levelOf(row.psnrDb);
    byKey.set(level.key, level);
  }
  return Array.from(byKey.values()).sort((a, b) => a.value - b.value);
}

export interface StrengthAxis {
  levels: StrengthLevel[];
  x: (key: string) => number;
}

/**
 * Ordinal strength axis: levels evenly spaced ascending, clean (inf)
 * pinned to the right edge slot. A grid has few discrete levels, so
 * ordinal spacing stays readable when they are not equally spaced in dB.
 */
export function strengthAxis(rows: GridRow[], frame: Frame): StrengthAxis {
  const levels = groupedLevels(rows);
  const step = innerWidth(frame) / Math.max(1, levels.length);
  const x = (key: string) => {
    const index = levels.findIndex((l) => l.key === key);
    if (index < 0) throw new Error(`level ${key} not on axis`);
    return frame.left + (index + 0.5) * step;
  };
  return { levels, x };
}

export function xAxisSvg(axis: StrengthAxis, frame: Frame, label: string): string {
  const y = frame.height - frame.bottom;
  const parts = axis.levels.map((level) =>
    [
      tag("line", {
        x1: axis.x(level.key),
        y1: y,
        x2: axis.x(level.key),
        y2: y + 5,
        stroke: "#333333",
        "stroke-width": "1",
      }),
      text(axis.x(level.key), y + 20, levelLabel(level.value), {
        "text-anchor": "middle",
        "font-size": "12",
      }),
    ].join("\n"),
  );
  parts.push(
    text(frame.left + innerWidth(frame) / 2, frame.height - 12, label, {
      "text-anchor": "middle",
      "font-size": "12",
    }),
  );
  return parts.join("\n");
}

export interface YAxis {
  y: (value: number) => number;
  lo: number;
  hi: number;
}

export function yAxisSvg(axisY: YAxis, frame: Frame, label: string, count = 5): string {
  const parts: string[] = [];
  for (const v of ticks(axisY.lo, axisY.hi, count)) {
    const yPix = axisY.y(v);
    parts.push(
      tag("line", {
        x1: frame.left - 5,
        y1: yPix,
        x2: frame.left,
        y2: yPix,
        stroke: "#333333",
        "stroke-width": "1",
      }),
      tag("line", {
        x1: frame.left,
        y1: yPix,
        x2: frame.width - frame.right,
        y2: yPix,
        stroke: "#eeeeee",
        "stroke-width": "1",
      }),
      text(frame.left - 8, yPix + 4, tickLabel(v), {
        "text-anchor": "end",
        "font-size": "12",
      }),
    );
  }
  parts.push(
    text(16, frame.top + innerHeight(frame) / 2, label, {
      "text-anchor": "middle",
      "font-size": "12",
      transform: `rotate(-90 16 ${(frame.top + innerHeight(frame) / 2).toFixed(2)})`,
    }),
  );
  return parts.join("\n");
}

/** Vertical marker at the configured operating strength. */
export function operatingPointSvg(
  axis: StrengthAxis,
  frame: Frame,
  wantDb: number,
): string {
  const finite = axis.levels.filter((l) => Number.isFinite(l));
  if (finite.length === 0) return "";
  let best = finite[0]!;
  for (const level of finite) {
    if (Math.abs(level - wantDb) < Math.abs(best - wantDb)) best = level;
  }
  const x = axis.x(best);
  return [
    tag("line", {
      x1: x,
      y1: frame.top,
      x2: x,
      y2: frame.height - frame.bottom,
      stroke: "#888888",
      "stroke-width": "1",
      "stroke-dasharray": "5 3",
      class: "operating-point",
      "data-psnr": levelKey(best),
    }),
    text(x + 4, frame.top + 14, `${levelLabel(best)} dB operating point`, {
      "font-size": "11",
      fill: "#888888",
    }),
  ].join("\n");
}

export interface LegendEntry {
  label: string;
  color: string;
  dash?: string;
}

export function legendSvg(entries: LegendEntry[], frame: Frame): string {
  const parts: string[] = [];
  const x0 = frame.width - frame.right - 180;
  entries.forEach((entry, i) => {
    const y = frame.top + 16 + i * 18;
    parts.push(
      tag("line", {
        x1: x0,
        y1: y,
        x2: x0 + 26,
        y2: y,
        stroke: entry.color,
        "stroke-width": "2",
        ...(entry.dash === undefined ? {} : { "stroke-dasharray": entry.dash }),
      }),
      text(x0 + 32, y + 4, entry.label, { "font-size": "12" }),
    );
  });
  return parts.join("\n");
}
