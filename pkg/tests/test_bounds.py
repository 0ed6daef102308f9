"""Tests for necode.bounds.

Oracles: the chi-square tail probability (scipy) for the Monte Carlo
violation rate, explicitly constructed operator pairs with closed-form
spectral distance and gap, and numpy SVD spectra.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from necode.bounds import (AlignmentReport, alignment, flatness,
                           verify_degradation, verify_retention)
from necode.firstlayer import LIFT_IDENTITY, FirstLayerOperator, extract
from necode.nn.datasets import LabeledDataset
from necode.nn.models import ModelSpec, TrainedModel
from necode.nn.training import train

LAYOUT = (1, 16, 16)


def make_operator(singulars, n=None, seed=0):
    """Operator with a prescribed spectrum; returns (op, U, V)."""
    singulars = np.asarray(singulars, dtype=np.float64)
    m = len(singulars)
    n = m if n is None else n
    rng = np.random.default_rng(seed)
    U = np.linalg.qr(rng.normal(size=(m, m)))[0]
    V = np.linalg.qr(rng.normal(size=(n, n)))[0]
    W = U @ np.diag(singulars) @ V[:, :m].T
    op = FirstLayerOperator(
        family="dense-front", layout=(n,), lift=LIFT_IDENTITY, W=W, W_eff=W,
        bias_flat=np.zeros(m), out_shape=(m,))
    return op, U, V


def random_model(family, seed=0, **kw):
    spec = ModelSpec(family, LAYOUT, 10, **kw)
    rng = np.random.default_rng(seed)
    return TrainedModel(spec=spec, params=rng.normal(
        scale=0.3, size=spec.param_count))


# ---------------------------------------------------------------------------
# retention bound.

def test_retention_sigma_zero_trivial():
    op, _, _ = make_operator([0.0, 0.0, 1.0], n=3)
    rep = verify_retention(op, tau=1e-4, sigma=0.0, t=0.05, trials=50)
    assert rep.k == 2
    assert rep.empirical_violation_rate == 0.0
    assert rep.max_observed_norm == 0.0
    assert rep.prob_floor == 1.0
    assert rep.passes is True


def test_retention_rate_matches_chi_square_oracle():
    # qualifying singular values pinned just under tau make the norm a
    # scaled chi distribution, so the violation rate has a closed form:
    # ||W d||^2 = (c tau)^2 ||z||^2 with c = 0.999, and the event
    # ||W d|| >= tau sqrt(k s^2 + t) happens iff chi2_k >= (k + t/s^2)/c^2
    tau, c = 1e-4, 0.999
    k, sigma, t, trials = 10, 0.1, 0.05, 10000
    op, _, _ = make_operator(np.full(k, c * tau).tolist() + [1.0, 2.0],
                             n=12)
    rep = verify_retention(op, tau=tau, sigma=sigma, t=t, trials=trials,
                           seed=3)
    assert rep.k == k
    p_true = stats.chi2.sf((k + t / sigma ** 2) / c ** 2, df=k)
    margin = 4.0 * np.sqrt(p_true * (1.0 - p_true) / trials) + 1e-12
    assert p_true > 0.05  # the oracle point is non-degenerate
    assert abs(rep.empirical_violation_rate - p_true) <= margin
    # the analytic ceiling 2 k sigma^4 / t^2 = 0.8 is loose but honored
    assert rep.ceiling == pytest.approx(0.8)
    assert rep.passes is True


def test_retention_deterministic_inequality_all_families():
    for family, kw in [("dense-front", dict(hidden=24)),
                       ("conv-front", dict(kernel=5)),
                       ("attention-front", dict(embed_dim=8, patch=4))]:
        op = extract(random_model(family, seed=4, **kw))
        rep = verify_retention(op, tau=1e-4, sigma=1.0, t=1.0, trials=500,
                               seed=5)
        assert rep.deterministic_violations == 0, family
        assert rep.max_observed_norm <= rep.bound


def test_retention_vacuous_point_flagged():
    op, _, _ = make_operator([0.0, 0.0, 1.0], n=3)
    rep = verify_retention(op, tau=1e-4, sigma=1.0, t=1e-3, trials=50)
    assert rep.prob_floor <= 0.0
    assert rep.vacuous
    assert rep.passes is None
    assert rep.as_dict()["vacuous"] is True


def test_retention_deterministic_across_calls():
    op, _, _ = make_operator([0.0, 0.0, 0.5, 1.0], n=4)
    a = verify_retention(op, tau=1e-4, sigma=1.0, t=0.5, trials=200, seed=6)
    b = verify_retention(op, tau=1e-4, sigma=1.0, t=0.5, trials=200, seed=6)
    c = verify_retention(op, tau=1e-4, sigma=1.0, t=0.5, trials=200, seed=7)
    assert a.max_observed_norm == b.max_observed_norm
    assert a.max_observed_norm != c.max_observed_norm


def test_retention_validates_args():
    op, _, _ = make_operator([0.0, 1.0], n=2)
    with pytest.raises(ValueError, match="trials"):
        verify_retention(op, tau=1e-4, sigma=1.0, t=0.5, trials=0)
    with pytest.raises(ValueError, match="t must"):
        verify_retention(op, tau=1e-4, sigma=1.0, t=0.0)
    with pytest.raises(ValueError, match="sigma"):
        verify_retention(op, tau=1e-4, sigma=-1.0, t=0.5)
    full_rank, _, _ = make_operator([0.5, 1.0], n=2, seed=8)
    with pytest.raises(ValueError, match="spectrum floor"):
        verify_retention(full_rank, tau=1e-4, sigma=1.0, t=0.5)


# ---------------------------------------------------------------------------
# degradation bound.

def batch(n_samples, n, seed=0):
    return np.random.default_rng(seed).normal(size=(n_samples, n))


def test_degradation_identical_operators_vacuous_not_failed():
    op, _, _ = make_operator([1e-6, 2e-6, 0.5, 1.0], n=4)
    rep = verify_degradation(op, op, tau=1e-4, x_tilde=batch(10, 4))
    assert rep.vacuous
    assert rep.epsilon == 0.0
    assert rep.violations == 0
    assert rep.passes is None
    assert np.all(rep.max_lhs <= 1e-12)
    assert np.all(np.isinf(rep.min_rhs))


def test_degradation_shifted_spectrum_closed_form():
    # same singular vectors, every singular value shifted by eta: the
    # spectral distance is exactly eta and the gap is eta to first order
    tail = np.array([1e-6, 3e-6, 5e-6])
    bulk = np.array([0.5, 1.0, 2.0])
    s1 = np.concatenate([tail, bulk])
    eta = 1e-3
    op1, U, V = make_operator(s1, seed=9)
    W2 = U @ np.diag(s1 + eta) @ V.T
    op2 = FirstLayerOperator(
        family="dense-front", layout=(6,), lift=LIFT_IDENTITY, W=W2,
        W_eff=W2, bias_flat=np.zeros(6), out_shape=(6,))
    X = batch(100, 6, seed=10)
    rep = verify_degradation(op1, op2, tau=1e-4, x_tilde=X)
    assert rep.indices.tolist() == [0, 1, 2]
    assert rep.spectral_distance == pytest.approx(eta, rel=1e-9)
    assert rep.epsilon == pytest.approx(eta, rel=0.01)
    assert not rep.vacuous
    assert rep.violations == 0
    assert rep.passes is True
    # rhs oracle: ||x|| (tau * distance / eps + eps)
    coeff = 1e-4 * rep.spectral_distance / rep.epsilon + rep.epsilon
    want = coeff * np.linalg.norm(X, axis=1).min()
    assert rep.min_rhs.min() == pytest.approx(want, rel=1e-12)


def test_degradation_perturbed_pair_zero_violations():
    for seed in range(5):
        s1 = np.array([2e-5, 6e-5, 0.4, 0.9, 1.7])
        op1, U, V = make_operator(s1, seed=20 + seed)
        rng = np.random.default_rng(30 + seed)
        E = rng.normal(size=(5, 5))
        E *= 1e-8 / np.linalg.svd(E, compute_uv=False)[0]
        W2 = op1.W_eff + E
        op2 = FirstLayerOperator(
            family="dense-front", layout=(5,), lift=LIFT_IDENTITY, W=W2,
            W_eff=W2, bias_flat=np.zeros(5), out_shape=(5,))
        rep = verify_degradation(op1, op2, tau=1e-4,
                                 x_tilde=batch(100, 5, seed=40 + seed))
        assert not rep.vacuous
        assert rep.epsilon > 1e-12
        assert rep.violations == 0


def test_degradation_trained_style_collision_flagged():
    # two wide operators both carry exact nullspaces: spectra collide at 0
    op1 = extract(random_model("dense-front", seed=50, hidden=24))
    op2 = extract(random_model("dense-front", seed=51, hidden=24))
    rep = verify_degradation(op1, op2, tau=1e-4, x_tilde=batch(5, 256))
    assert rep.vacuous
    assert rep.epsilon == 0.0
    assert rep.passes is None


def test_degradation_ratio_signal():
    op1 = extract(random_model("dense-front", seed=52, hidden=24))
    op2 = extract(random_model("dense-front", seed=53, hidden=24))
    from necode.recoder import RecodingConfig, identify_subspace, synthesize
    sub = identify_subspace(op1, tau=1e-4)
    cfg = RecodingConfig(lam=1.6, seed=54)
    x = np.full(LAYOUT, 0.5)
    deltas, x_ts = [], []
    for i in range(20):
        pert, x_t = synthesize(x, sub, cfg, op1,
                               rng=np.random.default_rng(60 + i))
        deltas.append(pert.delta)
        x_ts.append(x_t)
    rep = verify_degradation(op1, op2, tau=1e-4,
                             x_tilde=np.array(x_ts), deltas=np.array(deltas))
    # the first operator annihilates its own nullspace perturbations while
    # the second does not: the ratio is astronomically large
    assert rep.median_ratio > 1e3
    no_ratio = verify_degradation(op1, op2, tau=1e-4, x_tilde=np.array(x_ts))
    assert np.isnan(no_ratio.median_ratio)


def test_degradation_validates_inputs():
    op1, _, _ = make_operator([0.0, 1.0], n=2)
    op2, _, _ = make_operator([0.0, 0.5, 1.0], n=3)
    with pytest.raises(ValueError, match="shapes differ"):
        verify_degradation(op1, op2, tau=1e-4, x_tilde=batch(3, 2))
    with pytest.raises(ValueError, match="features per sample"):
        verify_degradation(op1, op1, tau=1e-4, x_tilde=batch(3, 5))
    full_rank, _, _ = make_operator([0.5, 1.0], n=2, seed=55)
    with pytest.raises(ValueError, match="qualifies"):
        verify_degradation(full_rank, op1, tau=1e-4, x_tilde=batch(3, 2))


# ---------------------------------------------------------------------------
# flatness.

def identity_op(n):
    return FirstLayerOperator(
        family="dense-front", layout=(n,), lift=LIFT_IDENTITY, W=np.eye(n),
        W_eff=np.eye(n), bias_flat=np.zeros(n), out_shape=(n,))


def test_flatness_identity_operator():
    rep = flatness(identity_op(20))
    assert rep.p95_count == 19  # ceil(0.95 * 20)
    assert rep.p99_count == 20
    assert rep.stats == {"max": 1.0, "min": 1.0, "mean": 1.0, "median": 1.0}


def test_flatness_rank_one():
    u = np.zeros((6, 1))
    u[2, 0] = 3.0
    W = u @ np.ones((1, 6))
    op = FirstLayerOperator(
        family="dense-front", layout=(6,), lift=LIFT_IDENTITY, W=W, W_eff=W,
        bias_flat=np.zeros(6), out_shape=(6,))
    rep = flatness(op)
    assert rep.p95_count == 1
    assert rep.p99_count == 1


def test_flatness_squared_mode_differs():
    op, _, _ = make_operator([1.0, 10.0], n=2, seed=56)
    assert flatness(op).p95_count == 2         # 10/11 < 0.95
    assert flatness(op, squared=True).p95_count == 1  # 100/101 > 0.95


def test_flatness_operator_spectrum_matches_numpy():
    op = extract(random_model("conv-front", seed=57, kernel=5))
    rep = flatness(op)
    want = np.sort(np.linalg.svd(op.W_eff, compute_uv=False))
    assert np.allclose(rep.spectrum, want, atol=1e-8)
    assert rep.p99_count < len(rep.spectrum)


def test_flatness_data_path_matches_numpy():
    rng = np.random.default_rng(58)
    X = rng.normal(size=(300, 40)) * np.linspace(0.1, 2.0, 40)
    rep = flatness(X)
    Xc = X - X.mean(axis=0)
    want = np.sort(np.linalg.svd(Xc / np.sqrt(300.0), compute_uv=False))
    assert np.allclose(rep.spectrum, want, atol=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=12), st.integers(0, 2 ** 31 - 1))
def test_flatness_count_ordering_property(n, seed):
    rng = np.random.default_rng(seed)
    op, _, _ = make_operator(np.abs(rng.normal(size=n)) + 1e-9, n=n,
                             seed=seed % 977)
    rep = flatness(op)
    assert 1 <= rep.p95_count <= rep.p99_count <= n


# ---------------------------------------------------------------------------
# alignment.

def test_alignment_identical_subspaces():
    rng = np.random.default_rng(59)
    X = rng.normal(size=(400, 12)) * np.linspace(3.0, 0.1, 12)
    from necode import linalg
    top = linalg.pca(X).eigvecs[:, -3:][:, ::-1]
    W = np.diag([3.0, 2.0, 1.0]) @ top.T  # rows read the top components
    op = FirstLayerOperator(
        family="dense-front", layout=(12,), lift=LIFT_IDENTITY, W=W, W_eff=W,
        bias_flat=np.zeros(3), out_shape=(3,))
    rep = alignment(op, X, top_k=3)
    assert np.all(rep.cosines >= 1.0 - 1e-8)
    assert rep.mean_cosine == pytest.approx(1.0, abs=1e-8)


def test_alignment_trained_blob_model_leading_cosine():
    rng = np.random.default_rng(60)
    n, dim = 400, 64
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    X = signs[:, None] * direction * 2.0 + rng.normal(scale=0.3,
                                                      size=(n, dim))
    y = (signs > 0).astype(np.int64)
    split = np.array(["train"] * (n - 64) + ["eval"] * 32 + ["probe"] * 32)
    data = LabeledDataset(np.clip(X * 0.2 + 0.5, 0.0, 1.0), y, split, 2,
                          "blobs")
    spec = ModelSpec("dense-front", (dim,), 2, hidden=8)
    model = train(spec, data, seed=0, epochs=30, lr=0.1, batch_size=32)
    rep = alignment(extract(model), data.inputs, top_k=1)
    assert rep.cosines[0] >= 0.9


def test_alignment_random_operator_is_diagnostic_only():
    op = extract(random_model("dense-front", seed=61, hidden=24))
    rng = np.random.default_rng(62)
    rep = alignment(op, rng.uniform(size=(100,) + LAYOUT), top_k=5)
    assert isinstance(rep, AlignmentReport)
    assert rep.cosines.shape == (5,)
    assert np.all((rep.cosines >= 0.0) & (rep.cosines <= 1.0))
    assert 0.0 <= rep.mean_cosine <= 1.0


def test_alignment_validates_args():
    op = extract(random_model("dense-front", seed=63, hidden=8))
    rng = np.random.default_rng(64)
    X = rng.uniform(size=(50,) + LAYOUT)
    with pytest.raises(ValueError, match="top_k"):
        alignment(op, X, top_k=0)
    with pytest.raises(ValueError, match="top_k"):
        alignment(op, X, top_k=9)
    with pytest.raises(ValueError, match="features"):
        alignment(op, rng.uniform(size=(50, 7)), top_k=2)
