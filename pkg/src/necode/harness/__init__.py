"""Evaluation protocol: grids, strength sweeps, preprocessing, attacks."""

from necode.harness.attacks import (Denoiser, attack_denoiser,
                                    attack_projection_back,
                                    denoiser_training_pairs,
                                    estimate_projection_basis,
                                    random_projection_basis, train_denoiser)
from necode.harness.evaluate import (EvalReport, EvalRow, cross_matrix,
                                     sweep_strength)
from necode.harness.preprocess import (DEFAULT_STRENGTHS, PREPROCESS_KINDS,
                                       PreprocessOp, apply_preprocess,
                                       bilinear_resize, crop_offsets,
                                       default_ops)
from necode.harness.report import (CSV_COLUMNS, merge_rows, read_rows,
                                   rows_to_csv, summarize, write_report)

__all__ = [
    "CSV_COLUMNS",
    "DEFAULT_STRENGTHS",
    "Denoiser",
    "EvalReport",
    "EvalRow",
    "PREPROCESS_KINDS",
    "PreprocessOp",
    "apply_preprocess",
    "default_ops",
    "attack_denoiser",
    "attack_projection_back",
    "bilinear_resize",
    "crop_offsets",
    "cross_matrix",
    "denoiser_training_pairs",
    "estimate_projection_basis",
    "merge_rows",
    "random_projection_basis",
    "read_rows",
    "rows_to_csv",
    "summarize",
    "sweep_strength",
    "train_denoiser",
    "write_report",
]
