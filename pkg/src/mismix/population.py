"""Population (infinite-data) objectives under a misspecified noise scale.

The fitted family keeps the truth's equal weights and isotropic shape but
assumes a noise scale tau, generally different from the true sigma; the
mismatch ratio is rho = tau/sigma.  This module evaluates and minimizes the
population negative log-likelihood

    L_tau(m) = E[-log p_{m,tau}(Y)],   Y ~ true mixture,

together with its small-tau companions: the k-means risk
Phi(m) = E[min_l ||Y - m_l||^2] and the bounded remainder r_tau with

    L_tau(m) = (d/2) log(2 pi tau^2) + log K + Phi(m)/(2 tau^2) + r_tau(m),
    r_tau in [-log K, 0].

Expectations are deterministic: Gauss-Hermite quadrature per true component
for d = 1, or a frozen common-random-numbers Monte Carlo pool for d >= 2.
Within one fit every iteration reuses the same nodes/pool, so minimizer
traces are bitwise reproducible and EM is exactly monotone on the
discretized objective.

Also here: the Hessian of L_tau at the fully collapsed configuration (all
means at the origin, for centered truths), the resulting collapse-stability
threshold rho^2 = 1 + lambda_max(Sigma_mu)/sigma^2, and a regular-simplex
constructor used by the threshold analysis.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import roots_hermite

from . import kernels
from .k2 import normal_cdf, normal_pdf
from .model import (
    GeometrySummary,
    MeanConfig,
    MixtureModel,
    geometry,
    perm_distance,
    rng_for,
    sample_gmm,
)

__all__ = [
    "FitSpec",
    "ObjectiveValue",
    "HessianBlocks",
    "CollapseReport",
    "PopulationFit",
    "TraceRow",
    "population_nll",
    "population_kmeans_risk",
    "rtau_remainder",
    "quasi_mle",
    "fit_quasi_mle",
    "hard_assignment_target",
    "fit_hard_assignment",
    "hessian_at_origin",
    "collapse_report",
    "make_regular_simplex",
    "trace_to_csv",
]

_OPTIMIZERS = ("population-EM", "population-Lloyd", "damped-gradient")


# ---------------------------------------------------------------------------
# configuration / result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitSpec:
    """How to evaluate population expectations and run the minimizer.

    tol=None applies the scale-aware default: 1e-8 * ||truth means||_F on the
    quadrature path, 1e-4 * ||truth means||_F on the Monte Carlo path
    (threshold on the perm_distance between successive iterates).
    """

    tau: float  # assumed (fitted) noise scale, > 0
    mc_samples: int = 1_000_000  # CRN pool size for d >= 2
    quadrature_nodes: int = 200  # Gauss-Hermite nodes per true component (d = 1)
    optimizer: str = "population-EM"
    max_iters: int = 500
    tol: float | None = None
    seed: int = 0  # keys the CRN pool; fixed seed => bit-identical traces

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be positive and finite, got {self.tau}")
        if self.mc_samples < 10_000:
            raise ValueError(f"mc_samples must be >= 1e4, got {self.mc_samples}")
        if self.quadrature_nodes < 10:
            raise ValueError(f"quadrature_nodes must be >= 10, got {self.quadrature_nodes}")
        if self.optimizer not in _OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {_OPTIMIZERS}, got {self.optimizer!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tol must be positive when given")

    def rho(self, sigma: float) -> float:
        """Mismatch ratio tau/sigma for a truth with noise scale sigma."""
        return self.tau / sigma

    @classmethod
    def from_rho(cls, rho: float, sigma: float, **kwargs) -> "FitSpec":
        return cls(tau=rho * sigma, **kwargs)


@dataclass(frozen=True)
class ObjectiveValue:
    """A population expectation: value, uncertainty, and evaluation count.

    std_error is 0 on the quadrature path (deterministic) and the Monte Carlo
    standard error of the mean on the pool path.
    """

    value: float
    std_error: float
    evaluations: int


@dataclass(frozen=True)
class TraceRow:
    iter: int
    objective: float
    std_error: float
    perm_dist_to_truth: float
    perm_dist_step: float


@dataclass(frozen=True)
class PopulationFit:
    """Full record of one population-objective minimization."""

    means: MeanConfig
    converged: bool
    n_iters: int
    objective: ObjectiveValue
    trace: tuple  # tuple[TraceRow, ...], one row per evaluated iterate
    diverged: bool = False
    frozen_components: tuple = ()  # indices ever frozen by the empty-cell rule


@dataclass(frozen=True)
class HessianBlocks:
    """Block structure of the Hessian of L_tau at the collapsed origin.

    For centered truth with second moment M = E[YY^T], the (k,k) block is
    I/(K tau^2) - (K-1) M/(K^2 tau^4) and every (k,j), k != j, block is
    M/(K^2 tau^4).  zero_sum_min_eig is the minimal curvature over the
    sum-zero perturbation subspace per unit ||h||_F^2 (this is what flips
    sign at the collapse threshold); common_shift_min_eig is the curvature
    of a common shift per unit ||u||^2, identically 1/tau^2.
    """

    diag_block: np.ndarray  # (d, d)
    offdiag_block: np.ndarray  # (d, d)
    zero_sum_min_eig: float
    common_shift_min_eig: float
    tau: float
    n_components: int

    def full_matrix(self) -> np.ndarray:
        """Assemble the (K d, K d) Hessian from the two blocks."""
        K = self.n_components
        d = self.diag_block.shape[0]
        out = np.tile(self.offdiag_block, (K, K))
        for k in range(K):
            out[k * d:(k + 1) * d, k * d:(k + 1) * d] = self.diag_block
        return out


@dataclass(frozen=True)
class CollapseReport:
    """Stability analysis of the fully collapsed configuration.

    The collapsed stationary point is a local minimum of L_tau exactly when
    rho^2 >= rho_sq_threshold = 1 + lambda_max(Sigma_mu)/sigma^2.
    """

    rho_sq_threshold: float
    lambda_max: float
    snr: float
    sigma: float

    def is_collapse_stable_at(self, rho: float) -> bool:
        return rho * rho >= self.rho_sq_threshold


# ---------------------------------------------------------------------------
# expectation engines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Measure:
    """Weighted point representation of the true mixture.

    exact=True marks deterministic quadrature (std_error 0); otherwise the
    points are a frozen uniform-weight Monte Carlo pool.
    """

    points: np.ndarray  # (N, d)
    weights: np.ndarray  # (N,), sums to 1
    exact: bool

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def expectation(self, values: np.ndarray) -> ObjectiveValue:
        mean = float(self.weights @ values)
        if self.exact:
            return ObjectiveValue(mean, 0.0, self.n_points)
        var = float(self.weights @ (values - mean) ** 2)
        return ObjectiveValue(mean, math.sqrt(max(var, 0.0) / self.n_points), self.n_points)


def _quadrature_measure(truth: MixtureModel, nodes: int) -> _Measure:
    # per-component Gauss-Hermite: E_{Y~p*}[g] = (1/K) sum_l (1/sqrt(pi))
    #   sum_i w_i g(mu_l + sqrt(2) sigma x_i)
    # (scipy's rule stays stable into the thousands of nodes, unlike
    # numpy.polynomial's, whose weights overflow past ~200)
    x, w = roots_hermite(nodes)
    mu = truth.means.means[:, 0]
    pts = (mu[:, None] + math.sqrt(2.0) * truth.sigma * x[None, :]).reshape(-1, 1)
    wts = np.tile(w / math.sqrt(math.pi), truth.n_components) / truth.n_components
    return _Measure(points=pts, weights=wts, exact=True)


def _pool_measure(truth: MixtureModel, spec: FitSpec) -> _Measure:
    sample = sample_gmm(truth, spec.mc_samples, rng_for(spec.seed, "population-pool").integers(2**63))
    n = sample.observations.shape[0]
    return _Measure(points=sample.observations, weights=np.full(n, 1.0 / n), exact=False)


def _measure_for(truth: MixtureModel, spec: FitSpec) -> _Measure:
    if truth.dim == 1:
        return _quadrature_measure(truth, spec.quadrature_nodes)
    return _pool_measure(truth, spec)


def _check_tau(tau: float, truth: MixtureModel):
    if not (np.isfinite(tau) and tau > 1e-12 * truth.sigma):
        raise ValueError(f"tau={tau} is non-positive or vanishing relative to sigma={truth.sigma}")


def _sq_dists(points: np.ndarray, means: np.ndarray) -> np.ndarray:
    # (N, K) squared distances; fine for the population-side sizes used here
    diff = points[:, None, :] - means[None, :, :]
    return np.square(diff).sum(axis=2)


def _nll_values(points, means, tau) -> np.ndarray:
    K, d = means.shape
    z = _sq_dists(points, means) / (2.0 * tau * tau)
    zmin = z.min(axis=1)
    # -log p = d/2 log(2 pi tau^2) + log K + z_min - log sum_l e^{-(z_l - z_min)}
    soft = np.log(np.exp(zmin[:, None] - z).sum(axis=1))
    return 0.5 * d * math.log(2.0 * math.pi * tau * tau) + math.log(K) + zmin - soft


def _check_candidate(candidate: MeanConfig, truth: MixtureModel):
    if candidate.dim != truth.dim:
        raise ValueError(f"candidate dim {candidate.dim} != truth dim {truth.dim}")


def population_nll(candidate: MeanConfig, truth: MixtureModel, spec: FitSpec) -> ObjectiveValue:
    """L_tau(candidate) = E[-log p_{candidate, tau}(Y)] under the truth.

    Quadrature (d = 1) or frozen CRN pool keyed on spec.seed (d >= 2).
    """
    _check_candidate(candidate, truth)
    _check_tau(spec.tau, truth)
    measure = _measure_for(truth, spec)
    values = _nll_values(measure.points, candidate.means, spec.tau)
    result = measure.expectation(values)
    if not np.isfinite(result.value):
        raise FloatingPointError(f"population NLL is non-finite for candidate {candidate.means!r}")
    return result


def population_kmeans_risk(candidate: MeanConfig, truth: MixtureModel, spec: FitSpec) -> ObjectiveValue:
    """Phi(candidate) = E[min_l ||Y - m_l||^2] on the same nodes/pool as the NLL.

    Sharing nodes with population_nll and rtau_remainder makes the
    L = const + Phi/(2 tau^2) + r decomposition an identity of integrands,
    exact to roundoff.
    """
    _check_candidate(candidate, truth)
    measure = _measure_for(truth, spec)
    values = _sq_dists(measure.points, candidate.means).min(axis=1)
    return measure.expectation(values)


def rtau_remainder(candidate: MeanConfig, truth: MixtureModel, spec: FitSpec) -> ObjectiveValue:
    """Soft-assignment remainder r_tau(candidate), always in [-log K, 0].

    r_tau -> 0 pointwise as tau -> 0+ and decreases (more negative) as tau
    grows.
    """
    _check_candidate(candidate, truth)
    _check_tau(spec.tau, truth)
    measure = _measure_for(truth, spec)
    z = _sq_dists(measure.points, candidate.means) / (2.0 * spec.tau**2)
    values = -np.log(np.exp(z.min(axis=1)[:, None] - z).sum(axis=1))
    return measure.expectation(values)


# ---------------------------------------------------------------------------
# minimizers
# ---------------------------------------------------------------------------


def _default_tol(spec: FitSpec, truth: MixtureModel, exact: bool) -> float:
    if spec.tol is not None:
        return spec.tol
    scale = truth.means.frobenius_norm
    if scale == 0.0:
        scale = 1.0  # zero-signal truth: fall back to unit scale
    return (1e-8 if exact else 1e-4) * scale


def _em_update(measure: _Measure, means: np.ndarray, tau: float):
    """One population-EM step; returns (objective, new_means, frozen_mask)."""
    K, d = means.shape
    z = _sq_dists(measure.points, means) / (2.0 * tau * tau)
    zmin = z.min(axis=1)
    expz = np.exp(zmin[:, None] - z)
    denom = expz.sum(axis=1)
    values = 0.5 * d * math.log(2.0 * math.pi * tau * tau) + math.log(K) + zmin - np.log(denom)
    obj = measure.expectation(values)
    gamma = expz / denom[:, None]
    wgamma = gamma * measure.weights[:, None]
    mass = wgamma.sum(axis=0)
    frozen = mass < 1e-12  # weights sum to 1, so this is the spec's E[gamma] rule
    new_means = means.copy()
    ok = ~frozen
    if ok.any():
        new_means[ok] = (wgamma.T @ measure.points)[ok] / mass[ok, None]
    return obj, new_means, frozen


def _gradient_update(measure: _Measure, means: np.ndarray, tau: float, state: dict):
    """One damped-gradient step with objective backtracking."""
    K, d = means.shape
    z = _sq_dists(measure.points, means) / (2.0 * tau * tau)
    zmin = z.min(axis=1)
    expz = np.exp(zmin[:, None] - z)
    denom = expz.sum(axis=1)
    values = 0.5 * d * math.log(2.0 * math.pi * tau * tau) + math.log(K) + zmin - np.log(denom)
    obj = measure.expectation(values)
    gamma = expz / denom[:, None]
    wgamma = gamma * measure.weights[:, None]
    # grad_l = -(1/tau^2) E[gamma_l (Y - m_l)]
    grad = -((wgamma.T @ measure.points) - wgamma.sum(axis=0)[:, None] * means) / tau**2
    eta = state.setdefault("eta", tau * tau)
    for _ in range(40):
        cand = means - eta * grad
        trial = measure.expectation(_nll_values(measure.points, cand, tau))
        if trial.value <= obj.value + 1e-12 * abs(obj.value):
            state["eta"] = min(eta * 1.2, tau * tau)
            return obj, cand, np.zeros(K, dtype=bool)
        eta *= 0.5
    state["eta"] = eta
    return obj, means.copy(), np.zeros(K, dtype=bool)


def fit_quasi_mle(truth: MixtureModel, spec: FitSpec, init: MeanConfig) -> PopulationFit:
    """Minimize L_tau from `init`; returns the full fit record with trace.

    optimizer="population-EM" (default) or "damped-gradient" minimize the
    mismatched NLL; "population-Lloyd" delegates to fit_hard_assignment (the
    tau -> 0 objective).  Stops when the perm_distance between successive
    iterates drops below the (scale-aware) tolerance.  A sustained objective
    increase beyond evaluation noise is reported via diverged=True.
    """
    if spec.optimizer == "population-Lloyd":
        return fit_hard_assignment(truth, spec, init)
    _check_candidate(init, truth)
    _check_tau(spec.tau, truth)
    measure = _measure_for(truth, spec)
    tol = _default_tol(spec, truth, measure.exact)
    update = _em_update if spec.optimizer == "population-EM" else _gradient_update
    state: dict = {}
    means = init.means.copy()
    truth_cfg = truth.means
    rows = []
    frozen_ever: set = set()
    prev_obj = None
    bad_streak = 0
    diverged = False
    converged = False
    step = 0.0
    n_iters = 0
    for t in range(spec.max_iters):
        if update is _gradient_update:
            obj, new_means, frozen = update(measure, means, spec.tau, state)
        else:
            obj, new_means, frozen = update(measure, means, spec.tau)
        cfg = MeanConfig(means)
        rows.append(TraceRow(t, obj.value, obj.std_error, perm_distance(cfg, truth_cfg), step))
        if prev_obj is not None:
            slack = max(1e-12 * abs(prev_obj.value), 3.0 * (prev_obj.std_error + obj.std_error))
            bad_streak = bad_streak + 1 if obj.value > prev_obj.value + slack else 0
            if bad_streak >= 5:
                diverged = True
                break
        prev_obj = obj
        frozen_ever.update(np.flatnonzero(frozen).tolist())
        step = perm_distance(MeanConfig(new_means), cfg)
        means = new_means
        n_iters = t + 1
        if step < tol:
            converged = True
            break
    final_cfg = MeanConfig(means)
    final_obj = _measure_expectation_nll(measure, means, spec.tau, truth)
    rows.append(TraceRow(n_iters, final_obj.value, final_obj.std_error,
                         perm_distance(final_cfg, truth_cfg), step))
    return PopulationFit(
        means=final_cfg,
        converged=converged and not diverged,
        n_iters=n_iters,
        objective=final_obj,
        trace=tuple(rows),
        diverged=diverged,
        frozen_components=tuple(sorted(frozen_ever)),
    )


def _measure_expectation_nll(measure, means, tau, truth) -> ObjectiveValue:
    result = measure.expectation(_nll_values(measure.points, means, tau))
    if not np.isfinite(result.value):
        raise FloatingPointError("population NLL became non-finite during fitting")
    return result


def quasi_mle(truth: MixtureModel, spec: FitSpec, init: MeanConfig) -> MeanConfig:
    """argmin L_tau from `init` (see fit_quasi_mle for the full record)."""
    return fit_quasi_mle(truth, spec, init).means


# -- population Lloyd -------------------------------------------------------


def _interval_moments_1d(truth: MixtureModel, bounds: np.ndarray):
    """Exact mass / first / second moments of the truth over cells.

    bounds has length C+1 (with leading -inf / trailing +inf); returns three
    (C,) arrays: M0 (mass), M1 (E[Y 1_cell]), M2 (E[Y^2 1_cell]).  Closed
    forms via the in-repo normal CDF, so the d=1 Lloyd map is evaluated
    without discretization error.
    """
    mu = truth.means.means[:, 0]
    s = truth.sigma
    K = mu.shape[0]
    # standardized cell edges per component: (K, C+1)
    z = (bounds[None, :] - mu[:, None]) / s
    cdf = np.array([[0.0 if np.isneginf(v) else 1.0 if np.isposinf(v) else normal_cdf(v) for v in row] for row in z])
    zfin = np.where(np.isinf(z), 0.0, z)  # pdf is 0 at +-inf edges; avoid inf*0
    pdf = np.where(np.isinf(z), 0.0, normal_pdf(zfin))
    zpdf = zfin * pdf
    dcdf = np.diff(cdf, axis=1)  # (K, C)
    dpdf = np.diff(pdf, axis=1)
    dzpdf = np.diff(zpdf, axis=1)
    m0 = dcdf.sum(axis=0) / K
    m1 = (mu[:, None] * dcdf - s * dpdf).sum(axis=0) / K
    # int y^2 phi = (mu^2 + s^2) dPhi - 2 mu s dphi - s^2 d(z phi)
    m2 = ((mu[:, None] ** 2 + s * s) * dcdf - 2.0 * mu[:, None] * s * dpdf - s * s * dzpdf).sum(axis=0) / K
    return m0, m1, m2


def _lloyd_step_exact_1d(truth: MixtureModel, centers: np.ndarray):
    """One exact d=1 population-Lloyd step.

    Returns (phi, new_centers, frozen_mask) where phi is the exact k-means
    risk of the *current* centers.  Boundary points (midpoints between
    adjacent sorted centers) carry no mass; coincident centers make the
    later cell empty, which freezes it (lowest index keeps the cell).
    """
    c = centers[:, 0]
    order = np.argsort(c, kind="stable")
    cs = c[order]
    bounds = np.concatenate(([-np.inf], (cs[:-1] + cs[1:]) / 2.0, [np.inf]))
    m0, m1, m2 = _interval_moments_1d(truth, bounds)
    phi = float(np.sum(m2 - 2.0 * cs * m1 + cs * cs * m0))
    frozen_sorted = m0 < 1e-12
    new_sorted = cs.copy()
    ok = ~frozen_sorted
    new_sorted[ok] = m1[ok] / m0[ok]
    new_centers = np.empty_like(c)
    frozen = np.zeros_like(frozen_sorted)
    new_centers[order] = new_sorted
    frozen[order] = frozen_sorted
    return phi, new_centers.reshape(-1, 1), frozen


def fit_hard_assignment(truth: MixtureModel, spec: FitSpec, init: MeanConfig) -> PopulationFit:
    """Population-Lloyd: nearest-center partition, conditional-mean update.

    d = 1 iterates the exact truncated-Gaussian interval-moment map
    (objective values carry std_error 0); d >= 2 runs Lloyd on the frozen
    CRN pool.  Components whose cell mass falls below 1e-12 are frozen in
    place and reported.
    """
    _check_candidate(init, truth)
    tol = _default_tol(spec, truth, exact=truth.dim == 1)
    means = init.means.copy()
    truth_cfg = truth.means
    rows = []
    frozen_ever: set = set()
    converged = False
    step = 0.0
    n_iters = 0
    if truth.dim == 1:
        for t in range(spec.max_iters):
            phi, new_means, frozen = _lloyd_step_exact_1d(truth, means)
            cfg = MeanConfig(means)
            rows.append(TraceRow(t, phi, 0.0, perm_distance(cfg, truth_cfg), step))
            frozen_ever.update(np.flatnonzero(frozen).tolist())
            step = perm_distance(MeanConfig(new_means), cfg)
            means = new_means
            n_iters = t + 1
            if step < tol:
                converged = True
                break
        final_phi = _lloyd_step_exact_1d(truth, means)[0]
        final_obj = ObjectiveValue(final_phi, 0.0, init.n_components + 1)
    else:
        measure = _pool_measure(truth, spec)
        prev_labels = None
        for t in range(spec.max_iters):
            cost_sum, cost_sq, counts, sums, labels = kernels.lloyd_accumulate(measure.points, means)
            n = measure.n_points
            phi = cost_sum / n
            se = math.sqrt(max(cost_sq / n - phi * phi, 0.0) / n)
            cfg = MeanConfig(means)
            rows.append(TraceRow(t, phi, se, perm_distance(cfg, truth_cfg), step))
            frozen = counts < 1e-12 * n
            frozen_ever.update(np.flatnonzero(frozen).tolist())
            new_means = means.copy()
            ok = ~frozen
            new_means[ok] = sums[ok] / counts[ok, None]
            step = perm_distance(MeanConfig(new_means), cfg)
            fixed = prev_labels is not None and np.array_equal(labels, prev_labels)
            prev_labels = labels
            means = new_means
            n_iters = t + 1
            if step < tol or fixed:
                converged = True
                break
        cost_sum, cost_sq, _, _, _ = kernels.lloyd_accumulate(measure.points, means)
        n = measure.n_points
        phi = cost_sum / n
        final_obj = ObjectiveValue(phi, math.sqrt(max(cost_sq / n - phi * phi, 0.0) / n), n)
    final_cfg = MeanConfig(means)
    rows.append(TraceRow(n_iters, final_obj.value, final_obj.std_error,
                         perm_distance(final_cfg, truth_cfg), step))
    return PopulationFit(
        means=final_cfg,
        converged=converged,
        n_iters=n_iters,
        objective=final_obj,
        trace=tuple(rows),
        frozen_components=tuple(sorted(frozen_ever)),
    )


def hard_assignment_target(truth: MixtureModel, spec: FitSpec, init: MeanConfig) -> MeanConfig:
    """Population-Lloyd fixed point reached from `init`."""
    return fit_hard_assignment(truth, spec, init).means


# ---------------------------------------------------------------------------
# collapse analysis
# ---------------------------------------------------------------------------


def hessian_at_origin(tau: float, second_moment: np.ndarray, n_components: int) -> HessianBlocks:
    """Hessian blocks of L_tau at the all-at-origin configuration.

    second_moment is M = E[YY^T] of the *centered* truth (= sigma^2 I +
    Sigma_mu); it must be symmetric.  Valid for any K >= 2.
    """
    M = np.asarray(second_moment, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"second_moment must be square, got shape {M.shape}")
    if not np.allclose(M, M.T, atol=1e-10 * max(1.0, float(np.abs(M).max()))):
        raise ValueError("second_moment must be symmetric")
    if n_components < 2:
        raise ValueError(f"need K >= 2, got {n_components}")
    if not (np.isfinite(tau) and tau > 0):
        raise ValueError(f"tau must be positive, got {tau}")
    K = n_components
    d = M.shape[0]
    eye = np.eye(d)
    diag = eye / (K * tau**2) - (K - 1) * M / (K**2 * tau**4)
    off = M / (K**2 * tau**4)
    zero_sum = eye / (K * tau**2) - M / (K * tau**4)  # = diag - off
    common = K * (diag + (K - 1) * off)  # = I/tau^2 up to roundoff
    return HessianBlocks(
        diag_block=diag,
        offdiag_block=off,
        zero_sum_min_eig=float(np.linalg.eigvalsh(zero_sum)[0]),
        common_shift_min_eig=float(np.linalg.eigvalsh(common)[0]),
        tau=float(tau),
        n_components=K,
    )


def collapse_report(truth: MixtureModel) -> CollapseReport:
    """Collapse-stability threshold in rho^2 for a given truth (K >= 2)."""
    if truth.n_components < 2:
        raise ValueError("collapse analysis needs K >= 2")
    geom = geometry(truth)
    return CollapseReport(
        rho_sq_threshold=1.0 + geom.lambda_max / truth.sigma**2,
        lambda_max=geom.lambda_max,
        snr=geom.snr,
        sigma=truth.sigma,
    )


def make_regular_simplex(n_components: int, dim: int, beta: float) -> MeanConfig:
    """K unit-norm, sum-zero means with pairwise inner product -1/(K-1),
    scaled by beta and embedded in the first K-1 coordinates of R^dim.

    Requires K >= 3 and dim >= K-1.  The between-means covariance then has
    lambda_max = beta^2/(K-1), giving collapse threshold 1 + SNR/(K-1).
    """
    K = n_components
    if K < 3:
        raise ValueError(f"regular simplex needs K >= 3, got {K}")
    if dim < K - 1:
        raise ValueError(f"need dim >= K-1 = {K - 1}, got {dim}")
    if not (np.isfinite(beta) and beta > 0):
        raise ValueError(f"beta must be positive, got {beta}")
    # centered unit vectors in the sum-zero hyperplane of R^K ...
    v = (np.eye(K) - 1.0 / K) / math.sqrt(1.0 - 1.0 / K)
    # ... expressed in the Helmert orthonormal basis of that hyperplane
    helmert = np.zeros((K - 1, K))
    for j in range(1, K):
        helmert[j - 1, :j] = 1.0 / math.sqrt(j * (j + 1))
        helmert[j - 1, j] = -j / math.sqrt(j * (j + 1))
    coords = v @ helmert.T  # (K, K-1)
    out = np.zeros((K, dim))
    out[:, : K - 1] = beta * coords
    return MeanConfig(out)


# ---------------------------------------------------------------------------
# trace export
# ---------------------------------------------------------------------------


def trace_to_csv(fit: PopulationFit, path) -> None:
    """Write a fit trace as iter,objective,std_error,perm_dist_to_truth,perm_dist_step."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "objective", "std_error", "perm_dist_to_truth", "perm_dist_step"])
        for row in fit.trace:
            writer.writerow([row.iter, repr(row.objective), repr(row.std_error),
                             repr(row.perm_dist_to_truth), repr(row.perm_dist_step)])
