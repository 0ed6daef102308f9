/**
 * The published evaluation-grid CSV schema.
 *
 * One row per (authorized target, evaluator) cell of one recoded batch.
 * Floats are written by the producer with round-trip repr, so the raw
 * field text is kept alongside the parsed number: raw text is the
 * ground truth when a figure needs to echo a value exactly.
 */

import Papa from "papaparse";

export const CSV_COLUMNS = [
  "target_model",
  "eval_model",
  "psnr_db",
  "preprocess",
  "attack",
  "clean_acc",
  "recoded_acc",
  "error_rate",
  "rho_hat",
  "gamma_hat",
  "seed",
] as const;

export type ColumnName = (typeof CSV_COLUMNS)[number];

const FLOAT_COLUMNS: readonly ColumnName[] = [
  "psnr_db",
  "clean_acc",
  "recoded_acc",
  "error_rate",
  "rho_hat",
  "gamma_hat",
];

/** One grid row: every column as raw text plus parsed numeric fields. */
export interface GridRow {
  raw: Record<ColumnName, string>;
  targetModel: string;
  evalModel: string;
  psnrDb: number;
  preprocess: string;
  attack: string;
  cleanAcc: number;
  recodedAcc: number;
  errorRate: number;
  rhoHat: number;
  gammaHat: number;
  seed: number;
}

export class SchemaError extends Error {}

/** Parse the producer's float repr, which includes inf/-inf/nan. */
export function parseFloatField(text: string, column: string): number {
  const t = text.trim();
  if (t === "inf") return Infinity;
  if (t === "-inf") return -Infinity;
  if (t === "nan") return NaN;
  const value = Number(t);
  if (t === "" || Number.isNaN(value)) {
    throw new SchemaError(`column ${column}: unparseable float ${JSON.stringify(text)}`);
  }
  return value;
}

function toRow(record: Record<string, string>, line: number): GridRow {
  const raw = {} as Record<ColumnName, string>;
  for (const col of CSV_COLUMNS) {
    const value = record[col];
    if (value === undefined) {
      throw new SchemaError(`row ${line}: missing value for column ${col}`);
    }
    raw[col] = value;
  }
  for (const col of FLOAT_COLUMNS) parseFloatField(raw[col], col);
  const seed = Number(raw.seed);
  if (!Number.isInteger(seed)) {
    throw new SchemaError(`row ${line}: seed must be an integer, got ${JSON.stringify(raw.seed)}`);
  }
  return {
    raw,
    targetModel: raw.target_model,
    evalModel: raw.eval_model,
    psnrDb: parseFloatField(raw.psnr_db, "psnr_db"),
    preprocess: raw.preprocess,
    attack: raw.attack,
    cleanAcc: parseFloatField(raw.clean_acc, "clean_acc"),
    recodedAcc: parseFloatField(raw.recoded_acc, "recoded_acc"),
    errorRate: parseFloatField(raw.error_rate, "error_rate"),
    rhoHat: parseFloatField(raw.rho_hat, "rho_hat"),
    gammaHat: parseFloatField(raw.gamma_hat, "gamma_hat"),
    seed,
  };
}

/**
 * Parse evaluation-grid CSV text.
 *
 * The header must contain every schema column (extra columns are
 * tolerated and ignored); a header-only file yields zero rows.
 * Throws SchemaError naming every missing column otherwise.
 */
export function parseGrid(text: string): GridRow[] {
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
  });
  const fatal = parsed.errors.filter((e) => e.code !== "TooFewFields" && e.code !== "TooManyFields");
  if (fatal.length > 0) {
    const first = fatal[0]!;
    throw new SchemaError(`CSV parse error: ${first.message} (row ${first.row ?? "?"})`);
  }
  const header = parsed.meta.fields ?? [];
  const missing = CSV_COLUMNS.filter((col) => !header.includes(col));
  if (missing.length > 0) {
    throw new SchemaError(`missing required columns: ${missing.join(", ")}`);
  }
  return parsed.data.map((record, i) => toRow(record, i + 2));
}

/** Ascending sort for strength levels; finite first, +inf last. */
export function sortedLevels(values: Iterable<number>): number[] {
  const unique = Array.from(new Set(values));
  unique.sort((a, b) => a - b);
  return unique;
}

/** Label for a strength level tick. */
export function levelLabel(psnrDb: number): string {
  if (psnrDb === Infinity) return "clean";
  if (Number.isInteger(psnrDb)) return String(psnrDb);
  return psnrDb.toFixed(2);
}
