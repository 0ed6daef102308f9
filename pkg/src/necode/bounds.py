"""Numerical verification of the retention and cross-model deviation bounds.

verify_retention checks, by Monte Carlo over the coefficient distribution,
that feature perturbations stay under the analytic ceiling tau*sqrt(k
sigma^2 + t) with the promised probability, and that the per-draw
deterministic inequality ||W delta|| <= tau ||z|| never fails.
verify_degradation checks the per-direction cross-operator deviation bound
driven by the spectral gap epsilon.  flatness and alignment report the two
spectral diagnostics the construction relies on: near-flat trailing spectra
and SVD-PCA subspace agreement.
"""

from dataclasses import dataclass, field

import numpy as np

from necode import linalg
from necode.firstlayer import FirstLayerOperator
from necode.recoder import identify_subspace

DET_SLACK = 1e-8
GAP_COLLISION = 1e-12


def _flat_batch(X, n, name="batch"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim < 2:
        raise ValueError(f"{name} must be a batch, got shape {X.shape}")
    flat = X.reshape(X.shape[0], -1)
    if flat.shape[1] != n:
        raise ValueError(
            f"{name} has {flat.shape[1]} features per sample, operator "
            f"expects {n}")
    return flat


@dataclass(frozen=True)
class RetentionBoundReport:
    """Monte Carlo audit of the feature-retention bound.

    bound is tau*sqrt(k sigma^2 + t); prob_floor = 1 - 2 k sigma^4 / t^2 may
    drop to zero or below, in which case the grid point is vacuous and
    excluded from pass/fail.  deterministic_violations counts draws where
    ||W delta|| exceeded tau ||z|| beyond slack; it must be zero.
    """

    k: int
    sigma: float
    t: float
    tau: float
    trials: int
    bound: float
    prob_floor: float
    empirical_violation_rate: float
    max_observed_norm: float
    deterministic_violations: int

    @property
    def ceiling(self):
        """Analytic upper bound on the violation probability."""
        return 1.0 - self.prob_floor

    @property
    def vacuous(self):
        """True when the analytic ceiling promises nothing."""
        return self.prob_floor <= 0.0

    @property
    def stderr(self):
        """Binomial standard error at the (clipped) analytic ceiling."""
        p = min(max(self.ceiling, 0.0), 1.0)
        return float(np.sqrt(p * (1.0 - p) / self.trials))

    @property
    def passes(self):
        """None when vacuous, else the three-sigma Monte Carlo verdict."""
        if self.vacuous:
            return None
        limit = max(0.0, self.ceiling) + 3.0 * self.stderr
        return (self.empirical_violation_rate <= limit
                and self.deterministic_violations == 0)

    def as_dict(self):
        """JSON-compatible flat record."""
        return {
            "k": self.k, "sigma": self.sigma, "t": self.t, "tau": self.tau,
            "trials": self.trials, "bound": self.bound,
            "prob_floor": self.prob_floor,
            "empirical_violation_rate": self.empirical_violation_rate,
            "max_observed_norm": self.max_observed_norm,
            "deterministic_violations": self.deterministic_violations,
            "vacuous": self.vacuous,
            "passes": self.passes,
        }


def verify_retention(op, tau, sigma, t, trials=10000, seed=0):
    """Audit the retention bound on one operator by seeded Monte Carlo.

    Draws z with i.i.d. N(0, sigma^2) entries on the tau-insensitive
    coordinates from per-trial substreams of seed, synthesizes the raw
    (unnormalized) perturbation, and measures ||W_eff vec(delta)||_2.

    Parameters
    ----------
    op : FirstLayerOperator
        Operator whose insensitive subspace is exercised.
    tau : float
        Subspace threshold; also scales the bound.
    sigma : float
        Coefficient standard deviation; zero is allowed and forces all
        feature norms to zero.
    t : float
        Positive tail offset of the bound.
    trials : int
        Number of Monte Carlo draws, at least 1.
    seed : int
        Root seed; trial i uses the (seed, i) substream.

    Returns
    -------
    RetentionBoundReport
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not t > 0:
        raise ValueError("t must be positive")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    subspace = identify_subspace(op, tau)
    k = subspace.k
    A = op.W_eff @ subspace.basis
    Z = np.empty((trials, k))
    for i in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        Z[i] = rng.normal(0.0, sigma, k)
    norms = np.linalg.norm(Z @ A.T, axis=1)
    z_norms = np.linalg.norm(Z, axis=1)
    bound = tau * np.sqrt(k * sigma ** 2 + t)
    det_limit = tau * z_norms * (1.0 + DET_SLACK) + DET_SLACK
    return RetentionBoundReport(
        k=k, sigma=float(sigma), t=float(t), tau=float(tau), trials=trials,
        bound=float(bound),
        prob_floor=float(1.0 - 2.0 * k * sigma ** 4 / t ** 2),
        empirical_violation_rate=float(np.mean(norms >= bound)),
        max_observed_norm=float(norms.max()),
        deterministic_violations=int(np.sum(norms > det_limit)),
    )


@dataclass(frozen=True)
class DegradationBoundReport:
    """Per-direction audit of the cross-operator deviation bound.

    Directions are indexed by ascending singular value of the first
    operator; only those with s1 <= tau qualify.  epsilon is the minimum
    gap between qualifying values of the first spectrum and every value of
    the second; a collision (epsilon = 0) makes every bound infinite and
    the report vacuous rather than failed.  ratios holds the per-sample
    operational signal ||W2 d|| / ||W1 d|| when perturbations are supplied.
    """

    indices: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    max_lhs: np.ndarray
    min_rhs: np.ndarray
    epsilon: float
    spectral_distance: float
    violations: int
    vacuous: bool
    ratios: np.ndarray = field(default=None)

    @property
    def median_ratio(self):
        """Median cross-operator feature ratio, NaN without perturbations."""
        if self.ratios is None or len(self.ratios) == 0:
            return float("nan")
        return float(np.median(self.ratios))

    @property
    def passes(self):
        """None when vacuous, else True iff no direction violated."""
        return None if self.vacuous else self.violations == 0

    def as_dict(self):
        """JSON-compatible record (arrays as lists)."""
        return {
            "indices": self.indices.tolist(),
            "sigma1": self.sigma1.tolist(),
            "sigma2": self.sigma2.tolist(),
            "max_lhs": self.max_lhs.tolist(),
            "min_rhs": self.min_rhs.tolist(),
            "epsilon": self.epsilon,
            "spectral_distance": self.spectral_distance,
            "violations": self.violations,
            "vacuous": self.vacuous,
            "median_ratio": self.median_ratio,
            "passes": self.passes,
        }


def verify_degradation(op1, op2, tau, x_tilde, deltas=None):
    """Audit the deviation bound between two same-shaped operators.

    For every direction i with s1_i <= tau and every recoded sample, the
    projected deviation |(s1_i v1_i - s2_i v2_i)^T x| must stay within
    ||x||_2 (tau * ||W1 - W2||_2 / epsilon + epsilon).  Directions are
    rank-matched across the two ascending extended spectra.

    Parameters
    ----------
    op1, op2 : FirstLayerOperator
        The recoding target and the operator it is measured against.
    tau : float
        Qualification threshold on the first spectrum.
    x_tilde : ndarray
        Batch of recoded inputs, native or flattened layout.
    deltas : ndarray, optional
        Matching perturbations; enables the feature-ratio signal.

    Returns
    -------
    DegradationBoundReport
    """
    W1, W2 = op1.W_eff, op2.W_eff
    if W1.shape != W2.shape:
        raise ValueError(
            f"operator shapes differ: {W1.shape} vs {W2.shape}")
    n = W1.shape[1]
    X = _flat_batch(x_tilde, n, "x_tilde")
    s1, V1 = linalg.right_spectrum(linalg.svd(W1))
    s2, V2 = linalg.right_spectrum(linalg.svd(W2))
    qualifying = np.flatnonzero(s1 <= tau)
    if qualifying.size == 0:
        raise ValueError(
            f"no direction of the first operator qualifies at tau={tau:g}")
    gaps = np.abs(s1[qualifying, None] - s2[None, :])
    epsilon = float(gaps.min())
    if epsilon < GAP_COLLISION:
        epsilon = 0.0
    distance = linalg.spectral_norm(W1 - W2)
    x_norms = np.linalg.norm(X, axis=1)
    # lhs rows: one deviation direction per qualifying index
    D = s1[qualifying, None] * V1[:, qualifying].T \
        - s2[qualifying, None] * V2[:, qualifying].T
    lhs = np.abs(D @ X.T)
    if epsilon == 0.0:
        rhs = np.full((qualifying.size, X.shape[0]), np.inf)
        vacuous = True
    else:
        coeff = tau * distance / epsilon + epsilon
        rhs = np.broadcast_to(coeff * x_norms, lhs.shape)
        vacuous = False
    slack = 1e-10 * np.maximum(1.0, rhs)
    violations = int(np.sum(np.any(lhs > rhs + slack, axis=1)))
    ratios = None
    if deltas is not None:
        Dlt = _flat_batch(deltas, n, "deltas")
        num = np.linalg.norm(Dlt @ W2.T, axis=1)
        den = np.linalg.norm(Dlt @ W1.T, axis=1)
        ratios = num / np.maximum(den, 1e-300)
    return DegradationBoundReport(
        indices=qualifying,
        sigma1=s1[qualifying].copy(),
        sigma2=s2[qualifying].copy(),
        max_lhs=lhs.max(axis=1),
        min_rhs=rhs.min(axis=1),
        epsilon=epsilon,
        spectral_distance=float(distance),
        violations=violations,
        vacuous=vacuous,
        ratios=ratios,
    )


@dataclass(frozen=True)
class FlatnessReport:
    """Spectral energy profile of an operator or a data matrix.

    spectrum is ascending; p95_count/p99_count are the minimal numbers of
    largest components whose energy (sum of values, or squares when
    squared=True) reaches the fraction.
    """

    spectrum: np.ndarray
    p95_count: int
    p99_count: int
    stats: dict
    squared: bool

    def as_dict(self):
        """JSON-compatible record (spectrum as list)."""
        return {
            "spectrum": self.spectrum.tolist(),
            "p95_count": self.p95_count,
            "p99_count": self.p99_count,
            "stats": dict(self.stats),
            "squared": self.squared,
        }


def _energy_count(desc_energy, fraction):
    total = desc_energy.sum()
    if total <= 0:
        return 0
    return int(np.searchsorted(np.cumsum(desc_energy),
                               fraction * total, side="left")) + 1


def flatness(subject, squared=False):
    """Spectral flatness profile of an operator or sample batch.

    Parameters
    ----------
    subject : FirstLayerOperator or ndarray
        Operator (spectrum of W_eff) or a batch of samples (spectrum of
        the mean-centered sample matrix).
    squared : bool
        Measure energy as the sum of squared values instead of the sum.

    Returns
    -------
    FlatnessReport
    """
    if isinstance(subject, FirstLayerOperator):
        s = linalg.svd(subject.W_eff).S.copy()
    else:
        X = np.asarray(getattr(subject, "inputs", subject), dtype=np.float64)
        X = X.reshape(X.shape[0], -1)
        # covariance route: same spectrum as the centered sample matrix
        # over sqrt(N), far cheaper than factoring N x n directly
        vals = linalg.pca(X).eigvals
        s = np.sqrt(np.clip(vals, 0.0, None))
    desc = s[::-1]
    energy = desc ** 2 if squared else desc
    stats = {
        "max": float(s.max()), "min": float(s.min()),
        "mean": float(s.mean()), "median": float(np.median(s)),
    }
    return FlatnessReport(
        spectrum=s, p95_count=_energy_count(energy, 0.95),
        p99_count=_energy_count(energy, 0.99), stats=stats, squared=squared)


@dataclass(frozen=True)
class AlignmentReport:
    """Principal-angle cosines between weight and data subspaces."""

    cosines: np.ndarray
    mean_cosine: float
    top_k: int

    def as_dict(self):
        """JSON-compatible record (cosines as list)."""
        return {
            "cosines": self.cosines.tolist(),
            "mean_cosine": self.mean_cosine,
            "top_k": self.top_k,
        }


def alignment(op, data, top_k):
    """Agreement between leading right-singular and principal subspaces.

    Compares the top_k right-singular directions of W_eff (descending
    singular value) with the top_k principal components of the flattened,
    mean-centered inputs.

    Parameters
    ----------
    op : FirstLayerOperator
    data : LabeledDataset or ndarray
        Samples whose covariance defines the principal subspace.
    top_k : int
        Subspace size; must fit both spectra.

    Returns
    -------
    AlignmentReport
    """
    W = op.W_eff
    X = np.asarray(getattr(data, "inputs", data), dtype=np.float64)
    X = X.reshape(X.shape[0], -1)
    limit = min(min(W.shape), X.shape[1])
    if not 1 <= top_k <= limit:
        raise ValueError(f"top_k must be in [1, {limit}], got {top_k}")
    if X.shape[1] != W.shape[1]:
        raise ValueError(
            f"data has {X.shape[1]} features, operator expects {W.shape[1]}")
    # right_spectrum gives a uniformly ascending column order; the raw
    # factors of a wide matrix park completion columns at the end
    _, V_ext = linalg.right_spectrum(linalg.svd(W))
    Vw = V_ext[:, -top_k:][:, ::-1]  # descending singular value
    spectrum = linalg.pca(X)
    Vp = spectrum.eigvecs[:, -top_k:][:, ::-1]
    cosines = linalg.principal_angles(Vw, Vp)
    return AlignmentReport(cosines=cosines,
                           mean_cosine=float(cosines.mean()), top_k=top_k)
