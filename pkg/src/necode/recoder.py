"""Identify insensitive subspaces and synthesize recoded inputs.

A recoding adds to each input a perturbation delta = V z confined to the
span of right-singular directions of the first-layer operator whose
singular values pass the threshold criterion.  Amplitude is controlled by
lambda through delta <- lambda * delta / max{1, ||delta||_2}, optionally
calibrated so a batch hits a target PSNR.
"""

import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from necode import linalg
from necode._io import atomic_write_bytes
from necode.firstlayer import FirstLayerOperator, LIFT_PATCH, extract, patch_index_map
from necode.nn.datasets import fingerprint_bytes
from necode.nn.serialize import model_bytes

CRITERIA = ("per-value", "cumulative-sum")
Z_MODES = ("gaussian", "fixed-code")
BOUND_SLACK = 1e-8
PSNR_TOL_DB = 0.25
BATCH_MAGIC = b"NECB"
BATCH_VERSION = 1


@dataclass(frozen=True)
class InsensitiveSubspace:
    """Right-singular directions whose singular values pass the criterion.

    basis columns are orthonormal n-vectors in input space, ordered by
    ascending singular value; singulars are the matching values.
    """

    basis: np.ndarray
    singulars: np.ndarray
    tau: float
    criterion: str

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=np.float64)
        sing = np.asarray(self.singulars, dtype=np.float64)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "singulars", sing)
        if basis.ndim != 2 or basis.shape[1] < 1:
            raise ValueError("subspace must contain at least one direction")
        if sing.shape != (basis.shape[1],):
            raise ValueError("one singular value per basis column required")
        if np.any(np.diff(sing) < 0):
            raise ValueError("singular values must be ascending")
        gram = basis.T @ basis
        resid = np.linalg.norm(gram - np.eye(basis.shape[1]))
        if resid > 1e-8 * max(1.0, np.sqrt(basis.shape[1])):
            raise ValueError("basis columns are not orthonormal")
        if self.criterion == "per-value":
            if np.any(sing > self.tau):
                raise ValueError("per-value criterion violated by basis")
        elif self.criterion == "cumulative-sum":
            if sing.sum() > self.tau:
                raise ValueError("cumulative-sum criterion violated by basis")
        else:
            raise ValueError(f"unknown criterion {self.criterion!r}")

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def k(self):
        return self.basis.shape[1]


@dataclass(frozen=True)
class RecodingConfig:
    """Synthesis parameters for one recoding run.

    When target_psnr_db is set, lam is treated as an output of calibration
    rather than an input.  sigma and lam are jointly redundant up to the
    max{1, ||delta||} kink, so calibration holds sigma fixed and moves lam.
    """

    tau: float = 1e-4
    sigma: float = 1.0
    lam: float = 1.0
    seed: int = 0
    target_psnr_db: float = None
    z_mode: str = "gaussian"
    criterion: str = "per-value"
    clip: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.z_mode not in Z_MODES:
            raise ValueError(f"unknown z_mode {self.z_mode!r}")
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")


@dataclass(frozen=True)
class Perturbation:
    """Realized coefficient vector and native-layout perturbation.

    z is the lambda-scaled coefficient vector (length n, support on the
    insensitive coordinates), so the retention bound
    ||W_eff vec(delta)||_F <= tau ||z||_2 + 1e-8 reads directly.
    """

    z: np.ndarray
    delta: np.ndarray
    realized_psnr_db: float


@dataclass(frozen=True)
class NEBatch:
    """Originals, recoded inputs, per-sample perturbations, provenance."""

    originals: np.ndarray
    recoded: np.ndarray
    perturbations: tuple
    model_fingerprint: str
    config: RecodingConfig

    def __post_init__(self):
        if self.originals.shape != self.recoded.shape:
            raise ValueError("originals and recoded shapes differ")
        if len(self.perturbations) != self.originals.shape[0]:
            raise ValueError("one perturbation per sample required")


def model_fingerprint(model):
    """Stable hex fingerprint of a trained model's serialized bytes."""
    return fingerprint_bytes(model_bytes(model))


def psnr_db(x, y):
    """Peak signal-to-noise ratio in dB between same-shape arrays, MAX = 1."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("psnr requires same-shape arrays")
    mse = np.mean((x - y) ** 2)
    if mse == 0.0:
        return np.inf
    return 10.0 * np.log10(1.0 / mse)


def _subspace_from_spectrum(s_ext, build_column, tau, criterion):
    """Select the qualifying ascending prefix and build its basis columns."""
    if criterion == "per-value":
        k = int(np.searchsorted(s_ext, tau, side="right"))
    else:
        k = int(np.searchsorted(np.cumsum(s_ext), tau, side="right"))
    if k == 0:
        raise ValueError(
            f"tau={tau:g} below spectrum floor: smallest singular value is "
            f"{s_ext[0]:.6g}, no direction qualifies"
        )
    basis = np.column_stack([build_column(i) for i in range(k)])
    return InsensitiveSubspace(basis=basis, singulars=s_ext[:k], tau=tau,
                               criterion=criterion)


def identify_subspace(op, tau, criterion="per-value"):
    """Tau-insensitive subspace of a first-layer operator.

    Selects the ascending prefix of right-singular directions passing the
    criterion (per-value: each s_i <= tau; cumulative-sum: prefix sum <=
    tau); always includes the numerical nullspace.  For operators whose
    patches partition the input, the per-patch spectrum is computed once
    and tiled across patches; otherwise the composed operator is factored
    directly.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if op.lift == LIFT_PATCH and op.is_partition:
        s_p, V_p = linalg.right_spectrum(linalg.svd(op.W))
        idx = patch_index_map(op.layout, op.kernel, op.stride, op.padding)
        P = idx.shape[1]
        n = int(np.prod(op.layout))
        s_ext = np.repeat(s_p, P)

        def build_column(i):
            col = np.zeros(n)
            col[idx[:, i % P]] = V_p[:, i // P]
            return col
    else:
        s_ext, V_ext = linalg.right_spectrum(linalg.svd(op.W_eff))

        def build_column(i):
            return V_ext[:, i]

    return _subspace_from_spectrum(s_ext, build_column, tau, criterion)


def sample_z(subspace, config, rng=None, code_index=None):
    """Coefficient n-vector with support on the insensitive coordinates.

    gaussian mode: i.i.d. N(0, sigma^2) entries on the first k coordinates,
    exactly zero elsewhere, drawn from rng (or a fresh config.seed stream).
    fixed-code mode: a deterministic per-code draw keyed by
    (config.seed, code_index), identical across calls.
    """
    z = np.zeros(subspace.dim)
    if config.z_mode == "fixed-code":
        key = np.random.SeedSequence([config.seed, int(code_index or 0)])
        rng = np.random.default_rng(key)
    elif rng is None:
        rng = np.random.default_rng(config.seed)
    z[: subspace.k] = rng.normal(0.0, config.sigma, subspace.k)
    return z


def _check_pairing(subspace, op):
    if subspace.dim != op.input_dim:
        raise ValueError(
            f"subspace dimension {subspace.dim} does not match operator "
            f"input dimension {op.input_dim}"
        )


def _scale_raw(delta_raw, lam):
    norm = float(np.linalg.norm(delta_raw))
    return lam / max(1.0, norm)


def synthesize(x, subspace, config, op, rng=None, code_index=None):
    """One recoded input: returns (Perturbation, x_tilde).

    delta = basis @ z[:k] reshaped to native layout, normalized by
    max{1, ||delta||_2} and scaled by lam; x_tilde = x + delta.  With
    config.clip, x_tilde is clipped to [0, 1] and the realized delta is
    re-projected onto the subspace, up to five rounds.
    """
    _check_pairing(subspace, op)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != tuple(op.layout):
        raise ValueError(f"input shape {x.shape} does not match operator "
                         f"layout {tuple(op.layout)}")
    z = sample_z(subspace, config, rng=rng, code_index=code_index)
    delta_vec = subspace.basis @ z[: subspace.k]
    scale = _scale_raw(delta_vec, config.lam)
    delta_vec = delta_vec * scale
    z = z * scale
    if config.clip:
        for _ in range(5):
            clipped = np.clip(x.reshape(-1) + delta_vec, 0.0, 1.0)
            coeff = subspace.basis.T @ (clipped - x.reshape(-1))
            delta_vec = subspace.basis @ coeff
        z = np.zeros(subspace.dim)
        z[: subspace.k] = coeff
    delta = delta_vec.reshape(x.shape)
    x_tilde = x + delta
    feat_norm = np.linalg.norm(op.W_eff @ delta_vec)
    bound = config.tau * np.linalg.norm(z) + BOUND_SLACK
    if feat_norm > bound:
        raise RuntimeError(
            f"retention bound violated: ||W delta|| = {feat_norm:.3e} > "
            f"{bound:.3e}"
        )
    pert = Perturbation(z=z, delta=delta,
                        realized_psnr_db=float(psnr_db(x, x_tilde)))
    return pert, x_tilde


def _raw_deltas(n_samples, subspace, config, code_indices=None):
    """Unscaled per-sample delta vectors from the seeded per-sample streams."""
    deltas = np.empty((n_samples, subspace.dim))
    for i in range(n_samples):
        if config.z_mode == "fixed-code":
            code = None if code_indices is None else code_indices[i]
            z = sample_z(subspace, config, code_index=code)
        else:
            z = sample_z(subspace, config,
                         rng=np.random.default_rng(config.seed ^ i))
        deltas[i] = subspace.basis @ z[: subspace.k]
    return deltas


def calibrate_lambda(x_batch, subspace, config, op, code_indices=None):
    """Amplitude lam whose mean batch PSNR is within 0.25 dB of the target.

    Bisection over lam; the bracket grows geometrically until it straddles
    the target.  An infinite target means no perturbation (lam = 0).
    Raises when the target is unreachable, reporting the achievable range.
    """
    _check_pairing(subspace, op)
    target = config.target_psnr_db
    if target is None:
        raise ValueError("config.target_psnr_db is not set")
    if np.isinf(target) and target > 0:
        return 0.0
    x_batch = np.asarray(x_batch, dtype=np.float64)
    if x_batch.ndim != len(op.layout) + 1:
        raise ValueError("calibration expects a batch of native inputs")
    raw = _raw_deltas(x_batch.shape[0], subspace, config, code_indices)

    def mean_psnr(lam):
        vals = np.empty(x_batch.shape[0])
        for i, x in enumerate(x_batch):
            delta = raw[i] * _scale_raw(raw[i], lam)
            if config.clip:
                clipped = np.clip(x.reshape(-1) + delta, 0.0, 1.0)
                delta = subspace.basis @ (subspace.basis.T
                                          @ (clipped - x.reshape(-1)))
            vals[i] = psnr_db(x.reshape(-1), x.reshape(-1) + delta)
        return float(np.mean(vals))

    lo, hi = 0.0, 1.0
    for _ in range(60):
        if mean_psnr(hi) < target:
            break
        hi *= 2.0
        if hi > 1e12:
            raise ValueError(
                f"target {target:g} dB is unreachable: achievable mean PSNR "
                f"stays above {mean_psnr(1e12):.2f} dB"
            )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        got = mean_psnr(mid)
        if abs(got - target) <= PSNR_TOL_DB:
            return mid
        if got > target:
            lo = mid
        else:
            hi = mid
    raise ValueError(
        f"calibration failed to reach {target:g} dB within tolerance; "
        f"achievable range around [{mean_psnr(hi):.2f}, {mean_psnr(lo):.2f}]"
    )


def recode_batch(data, model, config, split="train", limit=None):
    """NEBatch for a dataset split under a trained model.

    Extracts the first-layer operator, identifies the subspace, calibrates
    lam when a target PSNR is set, and synthesizes one perturbation per
    sample from the per-sample stream (config.seed XOR sample index, or the
    per-label fixed code).  Deterministic for a fixed seed.
    """
    X, y = data.split_arrays(split)
    if limit is not None:
        X, y = X[:limit], y[:limit]
    op = extract(model)
    subspace = identify_subspace(op, config.tau, config.criterion)
    cfg = config
    if config.target_psnr_db is not None and X.shape[0] > 0:
        codes = y if config.z_mode == "fixed-code" else None
        lam = calibrate_lambda(X, subspace, config, op, code_indices=codes)
        cfg = replace(config, lam=lam)
    perts = []
    recoded = np.empty_like(np.asarray(X, dtype=np.float64))
    for i, x in enumerate(X):
        if cfg.z_mode == "fixed-code":
            pert, x_t = synthesize(x, subspace, cfg, op, code_index=y[i])
        else:
            rng = np.random.default_rng(cfg.seed ^ i)
            pert, x_t = synthesize(x, subspace, cfg, op, rng=rng)
        perts.append(pert)
        recoded[i] = x_t
    return NEBatch(originals=np.asarray(X, dtype=np.float64),
                   recoded=recoded, perturbations=tuple(perts),
                   model_fingerprint=model_fingerprint(model), config=cfg)


def _config_record(config):
    rec = asdict(config)
    if rec["target_psnr_db"] is not None:
        rec["target_psnr_db"] = float(rec["target_psnr_db"])
    return rec


def save_batch(batch, path):
    """Write an NEBatch container: JSON provenance + raw <f8 tensors."""
    n = batch.originals.shape[0]
    layout = list(batch.originals.shape[1:])
    dim = batch.perturbations[0].z.shape[0] if n else 0
    header = {
        "version": BATCH_VERSION,
        "count": n,
        "layout": layout,
        "z_dim": dim,
        "model_fingerprint": batch.model_fingerprint,
        "config": _config_record(batch.config),
    }
    head = json.dumps(header, sort_keys=True).encode()
    z = np.stack([p.z for p in batch.perturbations]) if n else np.empty((0, 0))
    deltas = (np.stack([p.delta for p in batch.perturbations]) if n
              else np.empty((0,)))
    psnrs = np.array([p.realized_psnr_db for p in batch.perturbations])
    blob = b"".join([
        BATCH_MAGIC,
        np.uint32(len(head)).tobytes(),
        head,
        batch.originals.astype("<f8").tobytes(),
        batch.recoded.astype("<f8").tobytes(),
        z.astype("<f8").tobytes(),
        deltas.astype("<f8").tobytes(),
        psnrs.astype("<f8").tobytes(),
    ])
    digest = fingerprint_bytes(blob).encode()
    atomic_write_bytes(path, blob + digest)
    return path


def load_batch(path):
    """Read an NEBatch container written by save_batch, verifying integrity."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 24 or blob[:4] != BATCH_MAGIC:
        raise ValueError("not an NEBatch container")
    body, digest = blob[:-16], blob[-16:]
    if fingerprint_bytes(body).encode() != digest:
        raise ValueError("NEBatch container checksum mismatch")
    hlen = int(np.frombuffer(body[4:8], dtype=np.uint32)[0])
    header = json.loads(body[8:8 + hlen].decode())
    if header["version"] != BATCH_VERSION:
        raise ValueError(f"unsupported NEBatch version {header['version']}")
    n = header["count"]
    layout = tuple(header["layout"])
    dim = header["z_dim"]
    cfg = RecodingConfig(**header["config"])
    sample = int(np.prod(layout)) if layout else 0
    off = 8 + hlen

    def take(count):
        nonlocal off
        arr = np.frombuffer(body[off:off + 8 * count], dtype="<f8").copy()
        off += 8 * count
        return arr

    originals = take(n * sample).reshape((n, *layout))
    recoded = take(n * sample).reshape((n, *layout))
    z = take(n * dim).reshape((n, dim))
    deltas = take(n * sample).reshape((n, *layout))
    psnrs = take(n)
    perts = tuple(
        Perturbation(z=z[i], delta=deltas[i], realized_psnr_db=float(psnrs[i]))
        for i in range(n)
    )
    return NEBatch(originals=originals, recoded=recoded, perturbations=perts,
                   model_fingerprint=header["model_fingerprint"], config=cfg)


def export_png(batch, out_dir):
    """8-bit grayscale PNG export of recoded inputs (lossy quantization).

    Writes NNNN.png per sample plus provenance.json flagging the
    quantization; returns the written paths.
    """
    from PIL import Image

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, x in enumerate(batch.recoded):
        img = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
        if img.ndim == 3 and img.shape[0] == 1:
            img = img[0]
        if img.ndim != 2:
            raise ValueError("png export requires single-channel images")
        path = os.path.join(out_dir, f"{i:04d}.png")
        Image.fromarray(np.round(img * 255.0).astype(np.uint8)).save(path)
        paths.append(path)
    prov = {
        "export": "png-8bit",
        "lossy": True,
        "model_fingerprint": batch.model_fingerprint,
        "config": _config_record(batch.config),
    }
    prov_path = os.path.join(out_dir, "provenance.json")
    from necode._io import atomic_write_text

    atomic_write_text(prov_path, json.dumps(prov, sort_keys=True, indent=2))
    return paths
