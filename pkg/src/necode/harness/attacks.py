"""Adaptive reconstruction attacks against recoded batches.

Two attacker models: a global projection onto an estimated principal
subspace (the attacker sees public data only, or, in the labeled oracle
run, clean statistics), and a small trained conv denoiser operating on
recoded-to-recoded or recoded-to-clean pairs.  Neither reads the
authorized model's weights or its private subspace.
"""

from dataclasses import dataclass

import numpy as np

from necode import linalg

DENOISER_MODES = ("noise2noise", "noise2clean")

_ORTHO_TOL = 1e-8


def estimate_projection_basis(samples, rank):
    """(mean, orthonormal basis) of the top principal subspace.

    Parameters
    ----------
    samples : ndarray
        Attacker-visible samples, any native layout; flattened per row.
    rank : int
        Number of leading principal directions to keep.

    Returns
    -------
    (ndarray, ndarray)
        Feature mean (n,) and basis (n, rank), descending variance.
    """
    X = np.asarray(samples, dtype=np.float64).reshape(samples.shape[0], -1)
    if not 1 <= rank <= X.shape[1]:
        raise ValueError(f"rank must be in [1, {X.shape[1]}], got {rank}")
    spectrum = linalg.pca(X)
    basis = spectrum.eigvecs[:, -rank:][:, ::-1]
    return X.mean(axis=0), np.ascontiguousarray(basis)


def random_projection_basis(n_features, rank, seed=0):
    """Orthonormal basis of a uniformly random rank-dim subspace."""
    if not 1 <= rank <= n_features:
        raise ValueError(f"rank must be in [1, {n_features}], got {rank}")
    rng = np.random.default_rng(seed)
    Q = np.linalg.qr(rng.normal(size=(n_features, rank)))[0]
    return Q


def attack_projection_back(batch, basis, mean=None):
    """Project each sample onto the attacker's estimated signal subspace.

    Computes mean + B B^T (x - mean) per sample and clips to [0, 1],
    suppressing whatever the attacker estimates as low-variance
    directions.

    Parameters
    ----------
    batch : ndarray
        Samples in native layout; may be empty.
    basis : ndarray
        Orthonormal columns (n_features, rank).
    mean : ndarray, optional
        Feature mean to project around; zero when omitted.

    Returns
    -------
    ndarray
        Attacked batch, same shape, float64.
    """
    X = np.asarray(batch, dtype=np.float64)
    if X.shape[0] == 0:
        return X.copy()
    flat = X.reshape(X.shape[0], -1)
    B = np.asarray(basis, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] != flat.shape[1]:
        raise ValueError(
            f"basis must be ({flat.shape[1]}, rank), got {B.shape}")
    gram = B.T @ B
    if not np.allclose(gram, np.eye(B.shape[1]), atol=_ORTHO_TOL):
        raise ValueError("basis columns must be orthonormal")
    mu = np.zeros(flat.shape[1]) if mean is None else np.asarray(
        mean, dtype=np.float64).reshape(-1)
    if mu.shape[0] != flat.shape[1]:
        raise ValueError("mean length must match the feature count")
    proj = mu + ((flat - mu) @ B) @ B.T
    return np.clip(proj, 0.0, 1.0).reshape(X.shape)


# ---------------------------------------------------------------------------
# conv denoiser.


def _conv3(X, K):
    """Same-size 3x3 convolution of (N, Cin, H, W) with (Cout, Cin, 3, 3)."""
    n, cin, h, w = X.shape
    P = np.pad(X, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, K.shape[0], h, w))
    for dy in range(3):
        for dx in range(3):
            out += np.einsum("ncij,oc->noij", P[:, :, dy:dy + h, dx:dx + w],
                             K[:, :, dy, dx], optimize=True)
    return out


def _conv3_grad(X, dY):
    """Kernel gradient of _conv3: (Cout, Cin, 3, 3)."""
    n, cin, h, w = X.shape
    P = np.pad(X, ((0, 0), (0, 0), (1, 1), (1, 1)))
    g = np.zeros((dY.shape[1], cin, 3, 3))
    for dy in range(3):
        for dx in range(3):
            g[:, :, dy, dx] = np.einsum(
                "noij,ncij->oc", dY, P[:, :, dy:dy + h, dx:dx + w],
                optimize=True)
    return g


def _conv3_input_grad(dY, K):
    """Input gradient of _conv3: convolution with the transposed kernel."""
    Kt = K[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    return _conv3(dY, Kt)


@dataclass(frozen=True)
class Denoiser:
    """Residual two-layer 3x3 conv denoiser: x + K2 tanh(K1 x + b1) + b2."""

    K1: np.ndarray
    b1: np.ndarray
    K2: np.ndarray
    b2: np.ndarray
    mode: str
    final_loss: float

    def apply(self, batch):
        """Denoise a native-layout batch, clipped to [0, 1]."""
        X = np.asarray(batch, dtype=np.float64)
        if X.shape[0] == 0:
            return X.copy()
        squeeze = X.ndim == 3
        V = X[:, None] if squeeze else X
        H = np.tanh(_conv3(V, self.K1) + self.b1[None, :, None, None])
        out = V + _conv3(H, self.K2) + self.b2[None, :, None, None]
        out = np.clip(out, 0.0, 1.0)
        return out[:, 0] if squeeze else out


def train_denoiser(inputs, targets, mode, seed=0, epochs=120, hidden=8,
                   lr=0.05, batch_size=64):
    """Fit the small conv denoiser with SGD + momentum on MSE.

    Parameters
    ----------
    inputs, targets : ndarray
        Paired batches in native layout; noise2noise pairs two
        independent recodings, noise2clean pairs recoded with clean.
    mode : str
        Provenance tag, one of DENOISER_MODES.
    seed : int
        Initialization and shuffling seed.

    Returns
    -------
    Denoiser

    Raises
    ------
    RuntimeError
        If the training loss becomes non-finite.
    """
    if mode not in DENOISER_MODES:
        raise ValueError(f"unknown denoiser mode {mode!r}")
    X = np.asarray(inputs, dtype=np.float64)
    T = np.asarray(targets, dtype=np.float64)
    if X.shape != T.shape or X.shape[0] == 0:
        raise ValueError("inputs and targets must be equal-shape, non-empty")
    if X.ndim == 3:
        X, T = X[:, None], T[:, None]
    cin = X.shape[1]
    rng = np.random.default_rng(seed)
    K1 = rng.normal(scale=0.1, size=(hidden, cin, 3, 3))
    b1 = np.zeros(hidden)
    K2 = rng.normal(scale=0.01, size=(cin, hidden, 3, 3))
    b2 = np.zeros(cin)
    vel = [np.zeros_like(p) for p in (K1, b1, K2, b2)]
    loss = np.inf
    for _ in range(epochs):
        order = rng.permutation(X.shape[0])
        for start in range(0, X.shape[0], batch_size):
            idx = order[start:start + batch_size]
            xb, tb = X[idx], T[idx]
            Z = _conv3(xb, K1) + b1[None, :, None, None]
            H = np.tanh(Z)
            out = xb + _conv3(H, K2) + b2[None, :, None, None]
            err = out - tb
            loss = float(np.mean(err ** 2))
            if not np.isfinite(loss):
                raise RuntimeError("denoiser training diverged")
            dout = 2.0 * err / err.size
            gK2 = _conv3_grad(H, dout)
            gb2 = dout.sum(axis=(0, 2, 3))
            dH = _conv3_input_grad(dout, K2)
            dZ = dH * (1.0 - H ** 2)
            gK1 = _conv3_grad(xb, dZ)
            gb1 = dZ.sum(axis=(0, 2, 3))
            for p, v, g in zip((K1, b1, K2, b2), vel, (gK1, gb1, gK2, gb2)):
                v *= 0.9
                v -= lr * g
                p += v
    return Denoiser(K1=K1, b1=b1, K2=K2, b2=b2, mode=mode,
                    final_loss=loss)


def denoiser_training_pairs(clean, recodings, mode):
    """(inputs, targets) for one denoiser mode.

    noise2noise pairs the first two independent recodings of the same
    underlying samples; noise2clean pairs the first recoding with the
    clean originals.
    """
    if mode == "noise2noise":
        if len(recodings) < 2:
            raise ValueError("noise2noise needs two independent recodings")
        return recodings[0], recodings[1]
    if mode == "noise2clean":
        if len(recodings) < 1:
            raise ValueError("noise2clean needs one recoding")
        return recodings[0], clean
    raise ValueError(f"unknown denoiser mode {mode!r}")


def attack_denoiser(train_pairs, mode, test_batch, seed=0, **train_kw):
    """Train the conv denoiser on attacker pairs and apply it.

    Parameters
    ----------
    train_pairs : (ndarray, ndarray)
        Input/target batches, e.g. from denoiser_training_pairs.
    mode : str
        One of DENOISER_MODES (recorded provenance).
    test_batch : ndarray
        Batch to denoise; an empty batch short-circuits training.

    Returns
    -------
    ndarray
        Denoised batch, same shape as test_batch.
    """
    test = np.asarray(test_batch, dtype=np.float64)
    if test.shape[0] == 0:
        return test.copy()
    inputs, targets = train_pairs
    model = train_denoiser(inputs, targets, mode, seed=seed, **train_kw)
    return model.apply(test)
