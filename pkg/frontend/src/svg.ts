/**
 * Deterministic SVG assembly: plain string building, stable attribute
 * order, fixed decimal places for geometry. No DOM, no randomness, no
 * clock, so identical inputs give byte-identical files.
 */

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Geometry coordinate: fixed 2 decimals, trimmed, -0 normalized. */
export function px(value: number): string {
  if (!Number.isFinite(value)) throw new Error(`non-finite coordinate ${value}`);
  const fixed = value.toFixed(2).replace(/\.?0+$/, "");
  return fixed === "-0" ? "0" : fixed;
}

export type Attrs = Record<string, string | number>;

export function tag(name: string, attrs: Attrs, body?: string): string {
  const parts = Object.entries(attrs).map(
    ([key, value]) => `${key}="${typeof value === "number" ? px(value) : esc(value)}"`,
  );
  const head = parts.length > 0 ? `<${name} ${parts.join(" ")}` : `<${name}`;
  return body === undefined ? `${head}/>` : `${head}>${body}</${name}>`;
}

export function text(x: number, y: number, body: string, attrs: Attrs = {}): string {
  return tag("text", { x, y, ...attrs }, esc(body));
}

export interface Frame {
  width: number;
  height: number;
  left: number;
  right: number;
  top: number;
  bottom: number;
}

export function innerWidth(frame: Frame): number {
  return frame.width - frame.left - frame.right;
}

export function innerHeight(frame: Frame): number {
  return frame.height - frame.top - frame.bottom;
}

/** Linear map from [d0, d1] to [r0, r1]; constant domain maps to mid-range. */
export function linearScale(d0: number, d1: number, r0: number, r1: number): (v: number) => number {
  const span = d1 - d0;
  if (span === 0) return () => (r0 + r1) / 2;
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

/** Round-numbered ascending ticks covering [lo, hi]. */
export function ticks(lo: number, hi: number, count: number): number[] {
  if (lo === hi) return [lo];
  const rawStep = (hi - lo) / Math.max(1, count);
  const power = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * power);
  const step = candidates.find((c) => c >= rawStep) ?? candidates[candidates.length - 1]!;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + step * 1e-9; v += step) {
    out.push(Math.round(v / step) * step);
  }
  return out;
}

export function tickLabel(value: number): string {
  const rounded = Math.round(value * 1e6) / 1e6;
  return String(rounded);
}

/** Shared chart chrome: background, plot border, title. */
export function chrome(frame: Frame, title: string): string {
  const parts = [
    tag("rect", {
      x: 0,
      y: 0,
      width: frame.width,
      height: frame.height,
      fill: "#ffffff",
    }),
    tag("rect", {
      x: frame.left,
      y: frame.top,
      width: innerWidth(frame),
      height: innerHeight(frame),
      fill: "none",
      stroke: "#333333",
      "stroke-width": "1",
    }),
  ];
  if (title !== "") {
    parts.push(
      text(frame.width / 2, frame.top - 16, title, {
        "text-anchor": "middle",
        "font-size": "14",
        "font-weight": "bold",
        class: "title",
      }),
    );
  }
  return parts.join("\n");
}

/** Centered warning annotation for degenerate inputs. */
export function warning(frame: Frame, message: string): string {
  return text(frame.left + innerWidth(frame) / 2, frame.top + innerHeight(frame) / 2, message, {
    "text-anchor": "middle",
    "font-size": "13",
    fill: "#888888",
    class: "warning",
  });
}

export function document(frame: Frame, body: string): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${px(frame.width)}" height="${px(
      frame.height,
    )}" viewBox="0 0 ${px(frame.width)} ${px(frame.height)}" font-family="sans-serif">`,
    body,
    "</svg>",
    "",
  ].join("\n");
}
