/**
 * Retention gap and separation margin versus recoding strength.
 *
 * Each grid group carries two summary statistics: rho_hat, the
 * authorized model's accuracy drop on its own recodings, and
 * gamma_hat, the worst-case margin by which every other evaluator's
 * recoded error exceeds the authorized one. Both are plotted per
 * target; rho_hat near zero with gamma_hat large is the desired shape.
 */

import { GridRow } from "../schema.js";
import { ChartStyle, seriesColor } from "../style.js";
import { chrome, document as svgDocument, linearScale, tag, warning } from "../svg.js";
import {
  ChartResult,
  LegendEntry,
  filterRows,
  legendSvg,
  levelKey,
  makeFrame,
  operatingPointSvg,
  strengthAxis,
  xAxisSvg,
  yAxisSvg,
} from "./common.js";

const RHO_DASH = "5 3";

interface SweepPoint {
  level: number;
  value: number;
  raw: string;
}

function lineSvg(
  points: SweepPoint[],
  x: (level: number) => number,
  y: (value: number) => number,
  color: string,
  kind: "rho_hat" | "gamma_hat",
  target: string,
): string {
  if (points.length === 0) return "";
  const path = points
    .map((p, i) => `${i === 0 ? "M" : "L"}${x(p.level).toFixed(2)},${y(p.value).toFixed(2)}`)
    .join(" ");
  const parts = [
    tag("path", {
      d: path,
      fill: "none",
      stroke: color,
      "stroke-width": "2",
      ...(kind === "rho_hat" ? { "stroke-dasharray": RHO_DASH } : {}),
      class: `series-line ${kind}`,
    }),
  ];
  for (const p of points) {
    parts.push(
      tag("circle", {
        cx: x(p.level),
        cy: y(p.value),
        r: 3,
        fill: color,
        class: `point ${kind}`,
        "data-target": target,
        "data-kind": kind,
        "data-psnr": levelKey(p.level),
        "data-value": p.raw,
      }),
    );
  }
  return parts.join("\n");
}

export function boundSweep(rows: GridRow[], style: ChartStyle): ChartResult {
  const frame = makeFrame(style);
  // the diagonal row of each group carries the group's statistics once
  const kept = filterRows(rows, style).filter((r) => r.evalModel === r.targetModel);
  const head = chrome(frame, style.title);
  if (kept.length === 0) {
    const message =
      rows.length === 0 ? "no data rows" : "no authorized rows match the selection";
    return {
      svg: svgDocument(frame, [head, warning(frame, message)].join("\n")),
      warnings: [message],
    };
  }
  const axis = strengthAxis(kept, frame);
  const targets = Array.from(new Set(kept.map((r) => r.targetModel))).sort();
  const warnings: string[] = [];

  const perTarget = targets.map((target) => {
    const mine = kept.filter((r) => r.targetModel === target);
    const points = (field: "rhoHat" | "gammaHat", rawField: "rho_hat" | "gamma_hat") =>
      axis.levels.flatMap((level) => {
        const row = mine.find((r) => r.psnrDb === level);
        if (row === undefined || !Number.isFinite(row[field])) return [];
        return [{ level, value: row[field], raw: row.raw[rawField] }];
      });
    return { target, rho: points("rhoHat", "rho_hat"), gamma: points("gammaHat", "gamma_hat") };
  });
  if (perTarget.every((t) => t.gamma.length === 0)) {
    warnings.push("no finite separation margins (single-evaluator grid?)");
  }

  const values = perTarget.flatMap((t) => [...t.rho, ...t.gamma].map((p) => p.value));
  const lo = Math.min(0, ...values);
  const hi = Math.max(0, ...values);
  const pad = (hi - lo || 1) * 0.08;
  const yScale = linearScale(lo - pad, hi + pad, frame.height - frame.bottom, frame.top);

  const seriesParts: string[] = [];
  perTarget.forEach((entry, i) => {
    const color = seriesColor(i);
    seriesParts.push(
      lineSvg(entry.gamma, axis.x, yScale, color, "gamma_hat", entry.target),
      lineSvg(entry.rho, axis.x, yScale, color, "rho_hat", entry.target),
    );
  });

  const legend: LegendEntry[] = targets.map((target, i) => ({
    label: target,
    color: seriesColor(i),
  }));
  legend.push(
    { label: "gamma_hat (solid)", color: "#555555" },
    { label: "rho_hat (dashed)", color: "#555555", dash: RHO_DASH },
  );

  const zeroY = yScale(0);
  const body = [
    head,
    yAxisSvg({ y: yScale, lo: lo - pad, hi: hi + pad }, frame, "accuracy gap"),
    xAxisSvg(axis, frame, "recoding strength (PSNR, dB)"),
    tag("line", {
      x1: frame.left,
      y1: zeroY,
      x2: frame.width - frame.right,
      y2: zeroY,
      stroke: "#999999",
      "stroke-width": "1",
      class: "zero-line",
    }),
    operatingPointSvg(axis, frame, style.psnrDb),
    ...seriesParts.filter((s) => s !== ""),
    legendSvg(legend, frame),
  ].join("\n");
  return { svg: svgDocument(frame, body), warnings };
}
