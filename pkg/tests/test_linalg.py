"""Tests for necode.linalg against independent oracles.

Oracles implemented here and nowhere in the package:
  * Gram-route singular values: sqrt of LAPACK eigenvalues of W W^T.
  * Cardano closed-form eigenvalues for symmetric 3x3 matrices.
  * Power iteration for the spectral norm.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from necode import linalg


# ---------------------------------------------------------------------------
# Oracles.

def oracle_singulars_gram(W):
    """Ascending singular values via eigendecomposition of W W^T (LAPACK)."""
    m, n = W.shape
    G = W @ W.T if m <= n else W.T @ W
    vals = np.linalg.eigvalsh(G)
    return np.sqrt(np.clip(vals, 0.0, None))


def oracle_eigvals_cardano(C):
    """Closed-form ascending eigenvalues of a symmetric 3x3 matrix."""
    a, b, c = C[0, 0], C[1, 1], C[2, 2]
    d, e, f = C[0, 1], C[0, 2], C[1, 2]
    p1 = d * d + e * e + f * f
    if p1 == 0.0:
        return np.sort(np.array([a, b, c]))
    q = (a + b + c) / 3.0
    p2 = (a - q) ** 2 + (b - q) ** 2 + (c - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    B = (C - q * np.eye(3)) / p
    detB = (
        B[0, 0] * (B[1, 1] * B[2, 2] - B[1, 2] * B[2, 1])
        - B[0, 1] * (B[1, 0] * B[2, 2] - B[1, 2] * B[2, 0])
        + B[0, 2] * (B[1, 0] * B[2, 1] - B[1, 1] * B[2, 0])
    )
    phi = np.arccos(np.clip(detB / 2.0, -1.0, 1.0)) / 3.0
    e1 = q + 2.0 * p * np.cos(phi)
    e3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    return np.sort(np.array([e1, e2, e3]))


def oracle_power_iteration(W, iters=3000, seed=7):
    """Spectral norm via power iteration on W^T W."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=W.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = W.T @ (W @ v)
        lam = np.linalg.norm(w)
        if lam == 0.0:
            return 0.0
        v = w / lam
    return float(np.sqrt(lam))


def seeded_matrix(seed, m, n, scale=1.0):
    rng = np.random.default_rng(seed)
    return rng.normal(scale=scale, size=(m, n))


# ---------------------------------------------------------------------------
# SVD.

class TestSvd:
    def test_identity_2x2(self):
        """Identity input: unit singular values and U V^T = I."""
        f = linalg.svd(np.eye(2))
        np.testing.assert_allclose(f.S, [1.0, 1.0])
        np.testing.assert_allclose(f.U @ f.V.T, np.eye(2), atol=1e-12)

    def test_diagonal_ascending(self):
        """diag(4, 3) sorts to [3, 4] with axis-vector right factors."""
        f = linalg.svd(np.diag([4.0, 3.0]))
        np.testing.assert_allclose(f.S, [3.0, 4.0], atol=1e-12)
        np.testing.assert_allclose(np.abs(f.V), np.eye(2)[:, ::-1], atol=1e-12)
        # sign convention: first nonzero component of each column >= 0
        assert f.V[1, 0] > 0 and f.V[0, 1] > 0

    def test_seeded_3x4_matches_gram_oracle(self):
        """Singular values agree with the W W^T eigendecomposition route."""
        W = seeded_matrix(3, 3, 4)
        f = linalg.svd(W)
        scale = np.linalg.norm(W)
        np.testing.assert_allclose(f.S, oracle_singulars_gram(W),
                                   atol=1e-8 * scale)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10_000), m=st.integers(1, 12),
           n=st.integers(1, 12))
    def test_factor_invariants(self, seed, m, n):
        """Reconstruction, orthogonality, ordering, and sign conventions."""
        W = seeded_matrix(seed, m, n)
        f = linalg.svd(W)
        scale = max(np.linalg.norm(W), 1e-300)
        assert np.linalg.norm(f.reconstruct() - W) <= 1e-8 * scale
        assert np.linalg.norm(f.U.T @ f.U - np.eye(m)) <= 1e-8 * m
        assert np.linalg.norm(f.V.T @ f.V - np.eye(n)) <= 1e-8 * n
        assert np.all(np.diff(f.S) >= 0) and np.all(f.S >= 0)
        assert f.S.shape == (min(m, n),)
        for j in range(n):
            col = f.V[:, j]
            nz = np.flatnonzero(np.abs(col) > 1e-10)
            assert col[nz[0]] >= 0 if nz.size else True

    def test_rank_deficient(self):
        """Repeated columns produce exact-zero singular values."""
        rng = np.random.default_rng(11)
        base = rng.normal(size=(6, 2))
        W = np.concatenate([base, base[:, :1] + base[:, 1:]], axis=1)
        f = linalg.svd(W)
        assert f.S[0] <= 1e-12 * np.linalg.norm(W)

    def test_wide_trailing_nullspace(self):
        """For wide W the trailing V columns are exact nullspace vectors."""
        W = seeded_matrix(5, 4, 9)
        f = linalg.svd(W)
        tail = f.V[:, 4:]
        assert tail.shape == (9, 5)
        assert np.max(np.abs(W @ tail)) <= 1e-10 * np.linalg.norm(W)

    def test_right_spectrum_extends_with_zeros(self):
        """right_spectrum covers all n directions, zeros first, ascending."""
        W = seeded_matrix(6, 4, 9)
        s_ext, V_ext = linalg.right_spectrum(linalg.svd(W))
        assert s_ext.shape == (9,)
        assert np.sum(s_ext == 0.0) >= 5
        assert np.all(np.diff(s_ext) >= 0)
        assert np.linalg.norm(V_ext.T @ V_ext - np.eye(9)) <= 1e-8 * 9

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            linalg.svd(np.array([[1.0, np.nan], [0.0, 1.0]]))

    def test_deterministic(self):
        """Same input gives bit-identical factors on one backend."""
        W = seeded_matrix(21, 7, 5)
        f1, f2 = linalg.svd(W), linalg.svd(W)
        assert f1.U.tobytes() == f2.U.tobytes()
        assert f1.S.tobytes() == f2.S.tobytes()
        assert f1.V.tobytes() == f2.V.tobytes()


# ---------------------------------------------------------------------------
# Symmetric eigendecomposition.

class TestEigSym:
    def test_identity(self):
        spec = linalg.eig_sym(np.eye(4))
        np.testing.assert_allclose(spec.eigvals, np.ones(4))
        np.testing.assert_allclose(spec.eigvecs.T @ spec.eigvecs, np.eye(4),
                                   atol=1e-12)

    def test_rank_one_outer_product(self):
        """v v^T with unit v has eigenvalues [0, ..., 0, 1]."""
        rng = np.random.default_rng(3)
        v = rng.normal(size=6)
        v /= np.linalg.norm(v)
        spec = linalg.eig_sym(np.outer(v, v))
        np.testing.assert_allclose(spec.eigvals[:-1], np.zeros(5), atol=1e-12)
        np.testing.assert_allclose(spec.eigvals[-1], 1.0, atol=1e-12)
        assert abs(np.dot(spec.eigvecs[:, -1], v)) > 1 - 1e-10

    def test_seeded_psd_matches_cardano_oracle(self):
        """3x3 PSD eigenvalues match the closed-form cubic roots."""
        rng = np.random.default_rng(17)
        for _ in range(25):
            A = rng.normal(size=(3, 3))
            C = A @ A.T
            spec = linalg.eig_sym(C)
            scale = max(np.linalg.norm(C), 1.0)
            np.testing.assert_allclose(spec.eigvals, oracle_eigvals_cardano(C),
                                       atol=1e-8 * scale)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(1, 10))
    def test_reconstruction_property(self, seed, n):
        """C = V diag(vals) V^T within 1e-8 relative, vals ascending."""
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(n, n))
        C = (A + A.T) / 2.0
        spec = linalg.eig_sym(C)
        scale = max(np.linalg.norm(C), 1e-300)
        recon = spec.eigvecs @ np.diag(spec.eigvals) @ spec.eigvecs.T
        assert np.linalg.norm(recon - C) <= 1e-8 * scale
        assert np.all(np.diff(spec.eigvals) >= 0)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="asymmetric"):
            linalg.eig_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(ValueError, match="square"):
            linalg.eig_sym(np.ones((2, 3)))


# ---------------------------------------------------------------------------
# PCA.

class TestPca:
    def test_identical_rows_zero_covariance(self):
        X = np.tile(np.arange(5.0), (4, 1))
        spec = linalg.pca(X)
        np.testing.assert_allclose(spec.covariance, np.zeros((5, 5)),
                                   atol=1e-12)
        np.testing.assert_allclose(spec.eigvals, np.zeros(5), atol=1e-12)

    def test_antipodal_pair_top_direction(self):
        """Rows +v and -v make v the top principal direction."""
        v = np.array([3.0, 4.0, 0.0])
        spec = linalg.pca(np.stack([v, -v]))
        top = spec.eigvecs[:, -1]
        cos = abs(np.dot(top, v / np.linalg.norm(v)))
        assert cos > 1 - 1e-10

    def test_stretched_cloud_alignment(self):
        """A seeded cloud stretched along a known axis recovers that axis."""
        rng = np.random.default_rng(5)
        axis = np.array([1.0, 2.0, -1.0, 0.5])
        axis /= np.linalg.norm(axis)
        X = rng.normal(size=(400, 4)) * 0.1 + np.outer(
            rng.normal(size=400) * 3.0, axis)
        spec = linalg.pca(X)
        cos = abs(np.dot(spec.eigvecs[:, -1], axis))
        assert cos >= 0.99

    def test_covariance_definition(self):
        """covariance equals X_c^T X_c / N; uncentered mode skips centering."""
        rng = np.random.default_rng(9)
        X = rng.normal(size=(20, 6)) + 1.5
        Xc = X - X.mean(axis=0)
        np.testing.assert_allclose(linalg.pca(X).covariance,
                                   Xc.T @ Xc / 20, atol=1e-12)
        np.testing.assert_allclose(linalg.pca(X, center=False).covariance,
                                   X.T @ X / 20, atol=1e-12)

    def test_rejects_single_sample(self):
        with pytest.raises(ValueError, match="2 samples"):
            linalg.pca(np.ones((1, 4)))


# ---------------------------------------------------------------------------
# Nullspace.

class TestNullspace:
    def test_full_rank_square_empty(self):
        W = np.eye(4) + 0.1 * seeded_matrix(2, 4, 4)
        assert linalg.nullspace(W, 1e-12) == []

    def test_forced_by_rank_nullity(self):
        """1x2 matrix [1, 0] has the single nullspace direction (0, 1)."""
        vs = linalg.nullspace(np.array([[1.0, 0.0]]), 1e-12)
        assert len(vs) == 1
        np.testing.assert_allclose(np.abs(vs[0]), [0.0, 1.0], atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), m=st.integers(1, 8),
           extra=st.integers(1, 8))
    def test_wide_count_and_residual(self, seed, m, extra):
        """Wide m x n: at least n - m vectors, all with tiny W v."""
        n = m + extra
        W = seeded_matrix(seed, m, n)
        vs = linalg.nullspace(W, 1e-12)
        assert len(vs) >= n - m
        sn = np.linalg.norm(W, 2)
        for v in vs:
            assert np.linalg.norm(W @ v) <= 1e-10 * max(sn, 1e-300)


# ---------------------------------------------------------------------------
# Spectral norm.

class TestSpectralNorm:
    def test_identity(self):
        assert linalg.spectral_norm(np.eye(5)) == pytest.approx(1.0)

    def test_diagonal(self):
        assert linalg.spectral_norm(np.diag([0.5, 2.0])) == pytest.approx(2.0)

    def test_matches_power_iteration_oracle(self):
        for seed in range(8):
            W = seeded_matrix(seed, 9, 13)
            got = linalg.spectral_norm(W)
            want = oracle_power_iteration(W)
            assert got == pytest.approx(want, rel=1e-7)


# ---------------------------------------------------------------------------
# Principal angles.

class TestPrincipalAngles:
    def test_equal_bases(self):
        rng = np.random.default_rng(4)
        A = np.linalg.qr(rng.normal(size=(8, 3)))[0]
        np.testing.assert_allclose(linalg.principal_angles(A, A),
                                   np.ones(3), atol=1e-10)

    def test_orthogonal_complements(self):
        Q = np.linalg.qr(seeded_matrix(6, 6, 6))[0]
        np.testing.assert_allclose(
            linalg.principal_angles(Q[:, :3], Q[:, 3:]), np.zeros(3),
            atol=1e-10)

    def test_known_rotation(self):
        """Rotating a 1-D subspace by theta gives cosine cos(theta)."""
        theta = 0.3
        A = np.array([[1.0], [0.0]])
        B = np.array([[np.cos(theta)], [np.sin(theta)]])
        cos = linalg.principal_angles(A, B)
        np.testing.assert_allclose(cos, [np.cos(theta)], atol=1e-10)

    def test_descending_in_unit_interval(self):
        rng = np.random.default_rng(12)
        A = np.linalg.qr(rng.normal(size=(10, 4)))[0]
        B = np.linalg.qr(rng.normal(size=(10, 5)))[0]
        cos = linalg.principal_angles(A, B)
        assert np.all(np.diff(cos) <= 1e-12)
        assert np.all((cos >= 0) & (cos <= 1))

    def test_rejects_mismatched_rows(self):
        with pytest.raises(ValueError, match="row counts"):
            linalg.principal_angles(np.eye(3)[:, :1], np.eye(4)[:, :1])

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError, match="orthonormal"):
            linalg.principal_angles(np.ones((4, 2)), np.eye(4)[:, :2])
