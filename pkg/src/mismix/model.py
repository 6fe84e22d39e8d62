"""Core model objects for equal-weight isotropic Gaussian mixtures.

A model is a set of K component means in R^d plus a single noise scale
sigma; components share the same isotropic covariance sigma^2 I and equal
weights 1/K.  This module owns sampling, mean-configuration geometry
(separations, SNR, between-means covariance), and the permutation-invariant
distance used to score estimates against the truth.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "MeanConfig",
    "MixtureModel",
    "LabeledSample",
    "GeometrySummary",
    "rng_for",
    "derive_seed",
    "sample_gmm",
    "geometry",
    "perm_distance",
    "perm_distance_bruteforce",
    "normalized_mse",
]


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeanConfig:
    """An ordered set of K component means, stored as a (K, d) float64 array.

    The array is defensively copied, made C-contiguous and marked read-only,
    so configs can be shared across threads/processes without copies.
    """

    means: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.means, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"means must be a (K, d) matrix, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"need K >= 1 and d >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("means must be finite")
        if arr is self.means:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "means", arr)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.means))

    def with_means(self, arr) -> "MeanConfig":
        return MeanConfig(np.asarray(arr, dtype=np.float64))

    # -- CSV round trip ------------------------------------------------------
    # Header is component,dim0,...,dim{d-1}; values use repr() so the round
    # trip is bit-exact.

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["component"] + [f"dim{j}" for j in range(self.dim)])
            for k in range(self.n_components):
                writer.writerow([k] + [repr(float(v)) for v in self.means[k]])

    @classmethod
    def from_csv(cls, path) -> "MeanConfig":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[0] != "component":
                raise ValueError(f"bad mean-config header: {header!r}")
            rows = sorted(reader, key=lambda r: int(r[0]))
        if not rows:
            raise ValueError("empty mean-config CSV")
        return cls(np.array([[float(v) for v in r[1:]] for r in rows]))


@dataclass(frozen=True)
class MixtureModel:
    """Equal-weight isotropic GMM: means plus shared noise scale sigma > 0."""

    means: MeanConfig
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")

    @property
    def n_components(self) -> int:
        return self.means.n_components

    @property
    def dim(self) -> int:
        return self.means.dim


@dataclass(frozen=True)
class LabeledSample:
    """A draw from a mixture: latent component labels plus observations.

    `seed` records the generator seed so any sample can be regenerated
    bit-for-bit with sample_gmm(model, n, seed).
    """

    labels: np.ndarray  # (n,) int64 in [0, K)
    observations: np.ndarray  # (n, d) float64
    seed: int

    def __post_init__(self):
        if self.labels.shape[0] != self.observations.shape[0]:
            raise ValueError("labels and observations disagree on n")

    @property
    def n(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class GeometrySummary:
    """Scale-free summary of a mixture's mean geometry.

    snr          (1/(K sigma^2)) sum_l ||mu_l - mean||^2 = tr(sigma_mu)/sigma^2
    delta_min    smallest pairwise mean separation (+inf when K = 1)
    delta_max    largest pairwise mean separation (0 when K = 1)
    sigma_mu     between-means covariance (1/K) sum (mu_l - mean)(mu_l - mean)^T
    lambda_max   top eigenvalue of sigma_mu
    mixture_mean (d,) average of the means
    degenerate   True when K = 1 (delta_min undefined) or two means coincide
    """

    snr: float
    delta_min: float
    delta_max: float
    sigma_mu: np.ndarray
    lambda_max: float
    mixture_mean: np.ndarray
    degenerate: bool = field(default=False)


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------


def derive_seed(master_seed: int, *path) -> np.random.SeedSequence:
    """Derive a child seed sequence from a master seed and an index path.

    Distinct paths give statistically independent streams; the same
    (master_seed, path) always yields the same stream.  Non-integer path
    elements (e.g. metric names) are hashed into stable 32-bit keys.
    """
    key = []
    for p in path:
        if isinstance(p, (int, np.integer)):
            key.append(int(p) & 0xFFFFFFFF)
        else:
            # stable string hash (FNV-1a, 32-bit): avoids PYTHONHASHSEED
            h = 2166136261
            for b in str(p).encode():
                h = ((h ^ b) * 16777619) & 0xFFFFFFFF
            key.append(h)
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(key))


def rng_for(seed, *path) -> np.random.Generator:
    """Counter-based generator for (seed, path); bitwise reproducible."""
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
        if path:
            ss = np.random.SeedSequence(
                entropy=ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(path)
            )
    else:
        ss = derive_seed(seed, *path)
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_gmm(model: MixtureModel, n: int, seed) -> LabeledSample:
    """Draw n labeled observations: L ~ Unif{0..K-1}, Y | L ~ N(mu_L, sigma^2 I).

    Same (model, n, seed) is bit-identical across runs and platforms using the
    same numpy (counter-based Philox stream).
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    rng = rng_for(seed)
    labels = rng.integers(0, model.n_components, size=n, dtype=np.int64)
    noise = rng.standard_normal(size=(n, model.dim))
    obs = model.means.means[labels] + model.sigma * noise
    entropy = seed.entropy if isinstance(seed, np.random.SeedSequence) else int(seed)
    return LabeledSample(labels=labels, observations=obs, seed=entropy)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


def geometry(model: MixtureModel) -> GeometrySummary:
    """Separations, SNR and between-means covariance of a mixture."""
    mu = model.means.means
    K = mu.shape[0]
    center = mu.mean(axis=0)
    dev = mu - center
    sigma_mu = dev.T @ dev / K
    snr = float(np.trace(sigma_mu)) / model.sigma**2
    if K == 1:
        return GeometrySummary(
            snr=0.0,
            delta_min=np.inf,
            delta_max=0.0,
            sigma_mu=sigma_mu,
            lambda_max=float(np.linalg.eigvalsh(sigma_mu)[-1]),
            mixture_mean=center,
            degenerate=True,
        )
    diffs = mu[:, None, :] - mu[None, :, :]
    dist = np.sqrt((diffs**2).sum(axis=2))
    iu = np.triu_indices(K, k=1)
    pair = dist[iu]
    return GeometrySummary(
        snr=snr,
        delta_min=float(pair.min()),
        delta_max=float(pair.max()),
        sigma_mu=sigma_mu,
        lambda_max=float(np.linalg.eigvalsh(sigma_mu)[-1]),
        mixture_mean=center,
        degenerate=bool(pair.min() == 0.0),
    )


# ---------------------------------------------------------------------------
# permutation-invariant distance
# ---------------------------------------------------------------------------


def _sq_cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return (diff**2).sum(axis=2)


def _matched_cost(cost: np.ndarray, cols) -> float:
    # single summation path shared by the solver and the brute-force oracle,
    # so equal assignments give bit-equal totals
    return float(cost[np.arange(cost.shape[0]), cols].sum())


def perm_distance(a: MeanConfig, b: MeanConfig) -> float:
    """min over permutations pi of ||a - pi(b)||_F (exact assignment solve).

    Symmetric, nonnegative, zero iff the configs are equal up to relabeling;
    requires matching (K, d).
    """
    return float(np.sqrt(perm_distance_sq(a, b)))


def perm_distance_sq(a: MeanConfig, b: MeanConfig) -> float:
    if a.means.shape != b.means.shape:
        raise ValueError(
            f"config shapes differ: {a.means.shape} vs {b.means.shape}"
        )
    cost = _sq_cost_matrix(a.means, b.means)
    _, cols = linear_sum_assignment(cost)
    return _matched_cost(cost, cols)


def perm_distance_bruteforce(a: MeanConfig, b: MeanConfig) -> float:
    """K!-enumeration oracle for perm_distance; use only for small K."""
    if a.means.shape != b.means.shape:
        raise ValueError(
            f"config shapes differ: {a.means.shape} vs {b.means.shape}"
        )
    cost = _sq_cost_matrix(a.means, b.means)
    best = np.inf
    for perm in itertools.permutations(range(cost.shape[0])):
        total = _matched_cost(cost, list(perm))
        if total < best:
            best = total
    return float(np.sqrt(best))


def normalized_mse(estimate: MeanConfig, truth: MeanConfig) -> float:
    """perm_distance(estimate, truth)^2 / ||truth||_F^2.

    The truth configuration must be nonzero.
    """
    denom = truth.frobenius_norm**2
    if denom == 0.0:
        raise ValueError("truth config has zero Frobenius norm")
    return perm_distance_sq(estimate, truth) / denom
