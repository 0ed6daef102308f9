"""Deterministic dense linear algebra built on the Jacobi kernels.

SVD, symmetric eigendecomposition, PCA, nullspace extraction, spectral norm,
and principal angles between subspaces.  All factors use ascending value
order and a deterministic column-sign convention (first nonzero component of
each right vector >= 0).  Tolerances are relative to the Frobenius norm of
the decomposed matrix unless stated otherwise.
"""

from dataclasses import dataclass

import numpy as np

from necode import _kernels

SYMMETRY_RTOL = 1e-10


def as_matrix(W, name="matrix"):
    """Validate and return a finite 2-D float64 array with positive dims."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 1:
        raise ValueError(f"{name} must be 2-D with positive dims, got shape "
                         f"{W.shape}")
    if not np.isfinite(W).all():
        raise ValueError(f"{name} contains non-finite entries")
    return W


@dataclass(frozen=True)
class SpectralFactors:
    """Full SVD W = U diag(S) V^T.

    U is m x m orthogonal, V is n x n orthogonal, S ascending of length
    min(m, n).  The first len(S) columns of U and V pair with S; trailing
    columns of the larger factor complete an orthonormal basis and carry
    singular value exactly zero (for wide W they span the nullspace).
    """

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        r = self.S.shape[0]
        return (self.U[:, :r] * self.S) @ self.V[:, :r].T


@dataclass(frozen=True)
class CovarianceSpectrum:
    """Symmetric eigendecomposition C = V diag(vals) V^T, vals ascending."""

    covariance: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray


def svd(W):
    """One-sided Jacobi SVD with ascending singular values.

    Rejects non-finite input.  See SpectralFactors for the factor layout.
    """
    W = as_matrix(W, "W")
    U, S, V = _kernels.jacobi_svd(W)
    return SpectralFactors(U=U, S=S, V=V)


def right_spectrum(factors):
    """Per-direction singular values over all n right vectors, ascending.

    Returns (s_ext, V_ext): s_ext has length n with exact zeros for the
    completion directions of a wide matrix, followed by the computed
    ascending values; V_ext holds the correspondingly reordered columns.
    """
    S, V = factors.S, factors.V
    n = V.shape[1]
    r = S.shape[0]
    if r == n:
        return S.copy(), V
    s_ext = np.concatenate([np.zeros(n - r), S])
    V_ext = np.concatenate([V[:, r:], V[:, :r]], axis=1)
    return s_ext, V_ext


def eig_sym(C):
    """Jacobi eigendecomposition of a symmetric matrix, eigvals ascending.

    Rejects square matrices that are asymmetric beyond a 1e-10 relative
    tolerance.
    """
    C = as_matrix(C, "C")
    n, m = C.shape
    if n != m:
        raise ValueError(f"C must be square, got {C.shape}")
    scale = max(np.linalg.norm(C), np.finfo(np.float64).tiny)
    asym = np.linalg.norm(C - C.T)
    if asym > SYMMETRY_RTOL * scale:
        raise ValueError(
            f"C asymmetric beyond tolerance: residual {asym:.3e} vs "
            f"{SYMMETRY_RTOL:.0e} * {scale:.3e}"
        )
    sym = (C + C.T) / 2.0
    vals, vecs = _kernels.jacobi_eigh(sym)
    return CovarianceSpectrum(covariance=C, eigvecs=vecs, eigvals=vals)


def pca(samples, center=True):
    """Covariance spectrum of a sample matrix (N rows of n features).

    covariance = X^T X / N of the (by default mean-centered) samples; the
    uncentered second-moment mode is available via center=False.  Rejects
    N < 2.
    """
    X = as_matrix(samples, "samples")
    if X.shape[0] < 2:
        raise ValueError(f"need at least 2 samples, got {X.shape[0]}")
    if center:
        X = X - X.mean(axis=0)
    C = (X.T @ X) / X.shape[0]
    C = (C + C.T) / 2.0
    vals, vecs = _kernels.jacobi_eigh(C)
    return CovarianceSpectrum(covariance=C, eigvecs=vecs, eigvals=vals)


def nullspace(W, tol):
    """Right-singular directions with singular value <= tol, ascending.

    Every returned v satisfies ||W v||_2 <= tol * (1 + ||W||_2).  Includes
    the exact-nullspace completion directions of a wide matrix.
    """
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    factors = svd(W)
    s_ext, V_ext = right_spectrum(factors)
    keep = s_ext <= tol
    return [V_ext[:, j].copy() for j in np.flatnonzero(keep)]


def spectral_norm(W):
    """Largest singular value: the last entry of svd(W).S."""
    return float(svd(W).S[-1])


def principal_angles(A, B):
    """Cosines of principal angles between two column-orthonormal bases.

    Returns the singular values of A^T B, descending, each in [0, 1] (values
    are clamped within a 1e-8 numerical margin).  Rejects mismatched row
    counts and non-orthonormal inputs.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"row counts differ: {A.shape[0]} vs {B.shape[0]}")
    for name, M in (("A", A), ("B", B)):
        k = M.shape[1]
        resid = np.linalg.norm(M.T @ M - np.eye(k))
        if resid > 1e-7 * max(1.0, np.sqrt(k)):
            raise ValueError(f"{name} is not column-orthonormal "
                             f"(residual {resid:.3e})")
    cos = svd(A.T @ B).S[::-1].copy()
    if cos.size and (cos[0] > 1.0 + 1e-8 or cos[-1] < -1e-8):
        raise ValueError("principal-angle cosines left [0, 1] beyond margin")
    return np.clip(cos, 0.0, 1.0)
