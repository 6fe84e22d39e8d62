"""Finite-sample EM and Lloyd estimators with an assumed noise scale tau.

These mirror the population machinery on n observations: em_fit minimizes
the empirical mismatched NLL (log-space responsibilities, weighted-mean
M-step), lloyd_fit is hard-assignment k-means.  Inner loops go through
kernels.py, so the compiled backend is used when available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import LabeledSample, MeanConfig, rng_for

__all__ = ["EmConfig", "FitResult", "em_fit", "lloyd_fit", "empirical_objective"]

_INITS = ("truth", "random-from-data", "kmeans-plus-plus")


@dataclass(frozen=True)
class EmConfig:
    """Fit configuration shared by em_fit and lloyd_fit.

    tol is the relative objective-change stopping factor for EM: stop when
    |L_t - L_{t-1}| <= tol * |L_t|.  (Lloyd stops on partition fixity
    instead.)  init="truth" requires init_means.
    """

    tau: float
    max_iters: int = 300
    tol: float = 1e-10
    init: str = "truth"
    init_means: MeanConfig | None = None

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.init not in _INITS:
            raise ValueError(f"init must be one of {_INITS}, got {self.init!r}")
        if self.init == "truth" and self.init_means is None:
            raise ValueError("init='truth' requires init_means")
        if self.max_iters < 1 or self.tol <= 0:
            raise ValueError("need max_iters >= 1 and tol > 0")


@dataclass(frozen=True)
class FitResult:
    means: MeanConfig
    iters_used: int
    final_objective: float
    objective_trace: tuple  # objective before each update, then at the final means
    converged: bool
    frozen_components: tuple = ()


def _observations(data) -> np.ndarray:
    obs = data.observations if isinstance(data, LabeledSample) else np.asarray(data, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[0] < 1:
        raise ValueError(f"need an (n, d) observation matrix, got shape {obs.shape}")
    return np.ascontiguousarray(obs, dtype=np.float64)


def _initial_means(obs: np.ndarray, n_components: int, config: EmConfig, seed) -> np.ndarray:
    if config.init == "truth":
        init = config.init_means.means
        if init.shape != (n_components, obs.shape[1]):
            raise ValueError(
                f"init_means shape {init.shape} does not match (K, d) = ({n_components}, {obs.shape[1]})"
            )
        return init.copy()
    rng = rng_for(seed, "estimator-init")
    n = obs.shape[0]
    if config.init == "random-from-data":
        if n < n_components:
            raise ValueError("fewer observations than components")
        idx = rng.choice(n, size=n_components, replace=False)
        return obs[np.sort(idx)].copy()
    # kmeans-plus-plus: D^2-weighted seeding
    centers = np.empty((n_components, obs.shape[1]))
    centers[0] = obs[rng.integers(n)]
    d2 = np.square(obs - centers[0]).sum(axis=1)
    for k in range(1, n_components):
        total = d2.sum()
        if total <= 0:  # all points coincide with chosen centers
            centers[k:] = centers[0]
            break
        centers[k] = obs[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.square(obs - centers[k]).sum(axis=1))
    return centers


def em_fit(data, n_components: int, config: EmConfig, seed=0) -> FitResult:
    """EM for the equal-weight isotropic mixture at assumed scale config.tau.

    Deterministic given (data, config, seed).  The recorded objective trace
    is non-increasing (EM is a majorize-minimize scheme on the empirical
    objective); components whose responsibility mass drops below 1e-12 * n
    are frozen in place and reported.
    """
    obs = _observations(data)
    n = obs.shape[0]
    means = _initial_means(obs, n_components, config, seed)
    trace = []
    frozen_ever: set = set()
    converged = False
    iters = 0
    for t in range(config.max_iters):
        nll_sum, _, resp, wsums = kernels.em_accumulate(obs, means, config.tau)
        obj = nll_sum / n
        trace.append(obj)
        if t > 0 and abs(trace[-2] - obj) <= config.tol * abs(obj):
            converged = True
            break
        frozen = resp < 1e-12 * n
        frozen_ever.update(np.flatnonzero(frozen).tolist())
        ok = ~frozen
        means[ok] = wsums[ok] / resp[ok, None]
        iters = t + 1
    return FitResult(
        means=MeanConfig(means),
        iters_used=iters,
        final_objective=trace[-1],
        objective_trace=tuple(trace),
        converged=converged,
        frozen_components=tuple(sorted(frozen_ever)),
    )


def lloyd_fit(data, n_components: int, config: EmConfig, seed=0) -> FitResult:
    """Hard-assignment k-means; stops when the partition stops changing.

    Ties in the assignment go to the lowest component index; empty clusters
    are frozen in place and reported.  The trace records the empirical
    k-means risk (mean min squared distance) before each update.
    """
    obs = _observations(data)
    n = obs.shape[0]
    means = _initial_means(obs, n_components, config, seed)
    trace = []
    frozen_ever: set = set()
    converged = False
    prev_labels = None
    iters = 0
    for t in range(config.max_iters):
        cost_sum, _, counts, sums, labels = kernels.lloyd_accumulate(obs, means)
        trace.append(cost_sum / n)
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            converged = True
            break
        prev_labels = labels
        frozen = counts < 1e-12 * n
        frozen_ever.update(np.flatnonzero(frozen).tolist())
        ok = ~frozen
        means[ok] = sums[ok] / counts[ok, None]
        iters = t + 1
    return FitResult(
        means=MeanConfig(means),
        iters_used=iters,
        final_objective=trace[-1],
        objective_trace=tuple(trace),
        converged=converged,
        frozen_components=tuple(sorted(frozen_ever)),
    )


def empirical_objective(data, means: MeanConfig, tau: float) -> float:
    """Mean per-observation mismatched NLL at the given means."""
    if not (np.isfinite(tau) and tau > 0):
        raise ValueError(f"tau must be positive, got {tau}")
    obs = _observations(data)
    nll_sum, _ = kernels.nll_accumulate(obs, means.means, tau)
    return nll_sum / obs.shape[0]
