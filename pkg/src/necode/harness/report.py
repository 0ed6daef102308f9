"""Deterministic CSV and summary emission for evaluation grids.

Rows are sorted by (target, evaluator, psnr, preprocess, attack) so
concurrent grid production cannot change the artifact bytes; floats are
written with shortest round-trip repr so a reducer can recompute the
derived columns exactly.
"""

import csv
import io
import json

import numpy as np

from necode._io import atomic_write_text
from necode.harness.evaluate import EvalRow

CSV_COLUMNS = (
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
)

_FLOAT_COLUMNS = ("psnr_db", "clean_acc", "recoded_acc", "error_rate",
                  "rho_hat", "gamma_hat")


def _format(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def merge_rows(reports):
    """All rows of the given EvalReports in fixed reducer order."""
    rows = [row for report in reports for row in report.rows]
    rows.sort(key=lambda r: r.key())
    return rows


def rows_to_csv(rows):
    """CSV text (\\n line endings) with the exact schema columns."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_format(getattr(row, col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def read_rows(path):
    """Parse a schema CSV back into EvalRow records."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns {reader.fieldnames}")
        rows = []
        for rec in reader:
            rows.append(EvalRow(
                target_model=rec["target_model"],
                eval_model=rec["eval_model"],
                psnr_db=float(rec["psnr_db"]),
                preprocess=rec["preprocess"],
                attack=rec["attack"],
                clean_acc=float(rec["clean_acc"]),
                recoded_acc=float(rec["recoded_acc"]),
                error_rate=float(rec["error_rate"]),
                rho_hat=float(rec["rho_hat"]),
                gamma_hat=float(rec["gamma_hat"]),
                seed=int(rec["seed"]),
            ))
    return rows


def summarize(reports):
    """Structured summary mirroring the CSV plus the config echo.

    Rows appear with the CSV's formatted strings so the summary is
    strict JSON (no NaN/Infinity literals) and byte-stable.
    """
    rows = merge_rows(reports)
    return {
        "columns": list(CSV_COLUMNS),
        "rows": [
            {col: _format(getattr(row, col)) for col in CSV_COLUMNS}
            for row in rows
        ],
        "configs": [report.config for report in reports],
        "clean_accuracy": [
            {name: report.clean_acc[name] for name in report.models}
            for report in reports
        ],
        "skipped": [
            {"psnr_db": level, "reason": reason}
            for report in reports for (level, reason) in report.skipped
        ],
    }


def write_report(reports, csv_path, summary_path=None):
    """Write the merged CSV (and optional JSON summary) atomically.

    Parameters
    ----------
    reports : sequence of EvalReport
        Merged in fixed key order; an empty sequence yields a
        header-only CSV.
    csv_path : str
    summary_path : str, optional

    Returns
    -------
    str
        The CSV text that was written.
    """
    text = rows_to_csv(merge_rows(reports))
    atomic_write_text(csv_path, text)
    if summary_path is not None:
        payload = json.dumps(summarize(reports), indent=2, sort_keys=True,
                             allow_nan=False)
        atomic_write_text(summary_path, payload + "\n")
    return text
