/**
 * Accuracy versus recoding strength: the authorized series (evaluator
 * is the recoding target) against the unauthorized series (all other
 * evaluators), averaged per strength level.
 */

import { GridRow } from "../schema.js";
import { ChartStyle } from "../style.js";
import { chrome, document as svgDocument, linearScale, tag, warning } from "../svg.js";
import {
  ChartResult,
  filterRows,
  legendSvg,
  levelKey,
  makeFrame,
  operatingPointSvg,
  strengthAxis,
  xAxisSvg,
  yAxisSvg,
} from "./common.js";

const AUTHORIZED_COLOR = "#1f77b4";
const UNAUTHORIZED_COLOR = "#d62728";

interface SeriesPoint {
  level: number;
  mean: number;
  count: number;
}

/** Mean recoded accuracy per strength level over the selected rows. */
function series(rows: GridRow[], levels: number[], keep: (r: GridRow) => boolean): SeriesPoint[] {
  const points: SeriesPoint[] = [];
  for (const level of levels) {
    const cell = rows.filter((r) => r.psnrDb === level && keep(r));
    if (cell.length === 0) continue;
    const mean = cell.reduce((acc, r) => acc + r.recodedAcc, 0) / cell.length;
    points.push({ level, mean, count: cell.length });
  }
  return points;
}

function seriesSvg(
  points: SeriesPoint[],
  x: (level: number) => number,
  y: (value: number) => number,
  color: string,
  name: string,
): string {
  const path = points
    .map((p, i) => `${i === 0 ? "M" : "L"}${x(p.level).toFixed(2)},${y(p.mean).toFixed(2)}`)
    .join(" ");
  const parts = [
    tag("path", {
      d: path,
      fill: "none",
      stroke: color,
      "stroke-width": "2",
      class: `series-line ${name}`,
    }),
  ];
  for (const p of points) {
    parts.push(
      tag("circle", {
        cx: x(p.level),
        cy: y(p.mean),
        r: 3.5,
        fill: color,
        class: `point ${name}`,
        "data-psnr": levelKey(p.level),
        "data-acc": String(p.mean),
        "data-n": String(p.count),
      }),
    );
  }
  return parts.join("\n");
}

export function strengthCurve(rows: GridRow[], style: ChartStyle): ChartResult {
  const frame = makeFrame(style);
  const kept = filterRows(rows, style);
  const head = chrome(frame, style.title);
  if (kept.length === 0) {
    const message =
      rows.length === 0 ? "no data rows" : "no rows match the preprocess/attack selection";
    return { svg: svgDocument(frame, [head, warning(frame, message)].join("\n")), warnings: [message] };
  }
  const axis = strengthAxis(kept, frame);
  const yScale = linearScale(0, 1, frame.height - frame.bottom, frame.top);
  const authorized = series(kept, axis.levels, (r) => r.evalModel === r.targetModel);
  const unauthorized = series(kept, axis.levels, (r) => r.evalModel !== r.targetModel);
  const warnings: string[] = [];
  if (unauthorized.length === 0) {
    warnings.push("single-evaluator grid: no unauthorized series");
  }
  const body = [
    head,
    yAxisSvg({ y: yScale, lo: 0, hi: 1 }, frame, "accuracy"),
    xAxisSvg(axis, frame, "recoding strength (PSNR, dB)"),
    operatingPointSvg(axis, frame, style.psnrDb),
    seriesSvg(authorized, axis.x, yScale, AUTHORIZED_COLOR, "authorized"),
    unauthorized.length > 0
      ? seriesSvg(unauthorized, axis.x, yScale, UNAUTHORIZED_COLOR, "unauthorized")
      : "",
    legendSvg(
      [
        { label: "authorized", color: AUTHORIZED_COLOR },
        ...(unauthorized.length > 0
          ? [{ label: "unauthorized (mean)", color: UNAUTHORIZED_COLOR }]
          : []),
      ],
      frame,
    ),
  ]
    .filter((s) => s !== "")
    .join("\n");
  return { svg: svgDocument(frame, body), warnings };
}
