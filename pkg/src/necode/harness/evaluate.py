"""Cross-model evaluation grids and strength sweeps.

Each grid row records an (authorized target, evaluator) cell on one
recoded batch: clean and recoded accuracies, the error rate on recoded
inputs (smaller = better), the target's retention gap rho_hat, and the
separation margin gamma_hat = min over non-targets of their recoded
error minus the target's recoded error.
"""

import math
from dataclasses import dataclass, replace as dc_replace
from dataclasses import field

import numpy as np

from necode.harness.preprocess import PreprocessOp, apply_preprocess
from necode.nn.models import predict
from necode.recoder import recode_batch


@dataclass(frozen=True)
class EvalRow:
    """One (target, evaluator) cell; field order matches the CSV schema."""

    target_model: str
    eval_model: str
    psnr_db: float
    preprocess: str
    attack: str
    clean_acc: float
    recoded_acc: float
    error_rate: float
    rho_hat: float
    gamma_hat: float
    seed: int

    def key(self):
        """Fixed reducer ordering: target, evaluator, strength, ops."""
        return (self.target_model, self.eval_model, self.psnr_db,
                self.preprocess, self.attack)


@dataclass(frozen=True)
class EvalReport:
    """A complete evaluation grid plus provenance.

    rows hold one entry per (target, evaluator, psnr, preprocess,
    attack); clean_acc maps evaluator name to its accuracy on the
    untouched split; skipped lists (psnr target, reason) pairs for sweep
    levels whose calibration failed.
    """

    models: tuple
    rows: tuple
    clean_acc: dict
    config: dict
    skipped: tuple = field(default=())

    def __post_init__(self):
        names = set(self.models)
        if len(names) != len(self.models):
            raise ValueError("model names must be distinct")
        groups = {}
        for row in self.rows:
            gkey = (row.target_model, row.psnr_db, row.preprocess,
                    row.attack)
            groups.setdefault(gkey, []).append(row.eval_model)
            if row.target_model not in names:
                raise ValueError(f"unknown target {row.target_model!r}")
        for gkey, evals in groups.items():
            if sorted(evals) != sorted(names):
                raise ValueError(
                    f"grid group {gkey!r} does not cover every evaluator "
                    "exactly once")

    def diagonal(self):
        """Authorized cells (target == evaluator), in row order."""
        return tuple(r for r in self.rows
                     if r.target_model == r.eval_model)


def _acc(model, X, y):
    return float(np.mean(predict(model, X)[0] == y))


def _realized_psnr(batch):
    values = [p.realized_psnr_db for p in batch.perturbations]
    return float(np.mean(values)) if values else math.inf


def _provenance(config, data, split, limit):
    return {
        "dataset": data.name,
        "dataset_fingerprint": data.fingerprint(),
        "split": split,
        "limit": limit,
        "n_classes": data.n_classes,
        "chance": 1.0 / data.n_classes,
        "tau": config.tau,
        "sigma": config.sigma,
        "lam": config.lam,
        "seed": config.seed,
        "target_psnr_db": config.target_psnr_db,
        "z_mode": config.z_mode,
        "criterion": config.criterion,
    }


def _grid_rows(names, models, y, clean, X_eval, psnr, preprocess_label,
               attack_label, target, seed):
    recoded = {n: _acc(models[n], X_eval, y) for n in names}
    target_err = 1.0 - recoded[target]
    rho = clean[target] - recoded[target]
    others = [1.0 - recoded[n] - target_err for n in names if n != target]
    gamma = min(others) if others else math.nan
    return [
        EvalRow(
            target_model=target, eval_model=name, psnr_db=psnr,
            preprocess=preprocess_label, attack=attack_label,
            clean_acc=clean[name], recoded_acc=recoded[name],
            error_rate=1.0 - recoded[name], rho_hat=rho, gamma_hat=gamma,
            seed=seed)
        for name in names
    ]


def _eval_inputs(data, split, limit):
    X, y = data.split_arrays(split)
    if limit is not None:
        X, y = X[:limit], y[:limit]
    if X.shape[0] == 0:
        raise ValueError(f"split {split!r} is empty after limit")
    return X, y


def cross_matrix(models, data, config, split="eval", limit=None,
                 preprocess=None, attack=None):
    """Full target-by-evaluator grid on one dataset split.

    Parameters
    ----------
    models : dict
        Name -> TrainedModel; iteration order fixes the grid order.
        Same-spec different-seed entries give the same-architecture
        cells.
    data : LabeledDataset
    config : RecodingConfig
        Recoding parameters; a target_psnr_db triggers calibration per
        target.
    split : str
        Evaluation split.
    limit : int, optional
        Evaluate only the first samples of the split.
    preprocess : PreprocessOp, optional
        Applied to each recoded batch before evaluation.
    attack : (str, callable), optional
        Label plus transform(recoded_array, ne_batch) -> array applied
        after preprocessing; the label lands in the attack column.

    Returns
    -------
    EvalReport
    """
    if not models:
        return EvalReport(models=(), rows=(), clean_acc={},
                          config=_provenance(config, data, split, limit))
    if preprocess is not None and not isinstance(preprocess, PreprocessOp):
        raise TypeError("preprocess must be a PreprocessOp")
    names = tuple(models)
    X, y = _eval_inputs(data, split, limit)
    clean = {n: _acc(models[n], X, y) for n in names}
    plabel = "none" if preprocess is None else preprocess.label
    alabel = "none" if attack is None else attack[0]
    rows = []
    for target in names:
        batch = recode_batch(data, models[target], config, split=split,
                             limit=limit)
        X_eval = batch.recoded
        if preprocess is not None:
            X_eval = apply_preprocess(X_eval, preprocess)
        if attack is not None:
            X_eval = attack[1](X_eval, batch)
        rows.extend(_grid_rows(names, models, y, clean, X_eval,
                               _realized_psnr(batch), plabel, alabel,
                               target, config.seed))
    return EvalReport(models=names, rows=tuple(rows), clean_acc=clean,
                      config=_provenance(config, data, split, limit))


def sweep_strength(target, models, psnr_grid, data, config, split="eval",
                   limit=None):
    """Accuracy-vs-strength curves for one target across all evaluators.

    Parameters
    ----------
    target : str
        Name of the authorized model in models.
    models : dict
        Name -> TrainedModel; all entries are evaluated per level.
    psnr_grid : sequence of float
        Target PSNR levels in dB; math.inf gives the identity recoding.
    data, config, split, limit : as cross_matrix.

    Returns
    -------
    EvalReport
        Rows for every level whose calibration succeeded; failed levels
        land in report.skipped as (level, reason).
    """
    if target not in models:
        raise ValueError(f"unknown target {target!r}")
    names = tuple(models)
    X, y = _eval_inputs(data, split, limit)
    clean = {n: _acc(models[n], X, y) for n in names}
    rows, skipped = [], []
    for level in psnr_grid:
        cfg = dc_replace(config, target_psnr_db=float(level))
        try:
            batch = recode_batch(data, models[target], cfg, split=split,
                                 limit=limit)
        except (ValueError, FloatingPointError) as exc:
            skipped.append((float(level), str(exc)))
            continue
        rows.extend(_grid_rows(names, models, y, clean, batch.recoded,
                               _realized_psnr(batch), "none", "none",
                               target, cfg.seed))
    return EvalReport(models=names, rows=tuple(rows), clean_acc=clean,
                      config=_provenance(config, data, split, limit),
                      skipped=tuple(skipped))
