"""Pure-numpy implementations of the finite-sample inner loops.

Same contracts as the compiled extension; chunked so temporaries stay small.
numpy's pairwise summation keeps the scalar accumulators accurate enough for
the 1e-9-per-step monotonicity checks on EM traces.
"""

import math

import numpy as np

_CHUNK = 1 << 18


def _log_resp(chunk, means, inv2t2):
    diff = chunk[:, None, :] - means[None, :, :]
    z = np.square(diff).sum(axis=2) * inv2t2
    zmin = z.min(axis=1)
    expz = np.exp(zmin[:, None] - z)
    denom = expz.sum(axis=1)
    return zmin, expz, denom


def em_accumulate(points, means, tau):
    """Fused E-step: returns (nll_sum, nll_sq_sum, resp_sums, weighted_sums)."""
    n, d = points.shape
    K = means.shape[0]
    inv2t2 = 1.0 / (2.0 * tau * tau)
    const = 0.5 * d * math.log(2.0 * math.pi * tau * tau) + math.log(K)
    nll_sum = 0.0
    nll_sq_sum = 0.0
    resp = np.zeros(K)
    wsums = np.zeros((K, d))
    for start in range(0, n, _CHUNK):
        chunk = points[start:start + _CHUNK]
        zmin, expz, denom = _log_resp(chunk, means, inv2t2)
        vals = const + zmin - np.log(denom)
        nll_sum += float(vals.sum())
        nll_sq_sum += float(np.square(vals).sum())
        gamma = expz / denom[:, None]
        resp += gamma.sum(axis=0)
        wsums += gamma.T @ chunk
    return nll_sum, nll_sq_sum, resp, wsums


def nll_accumulate(points, means, tau):
    """Returns (nll_sum, nll_sq_sum) of the per-point mismatched NLL."""
    n, d = points.shape
    K = means.shape[0]
    inv2t2 = 1.0 / (2.0 * tau * tau)
    const = 0.5 * d * math.log(2.0 * math.pi * tau * tau) + math.log(K)
    nll_sum = 0.0
    nll_sq_sum = 0.0
    for start in range(0, n, _CHUNK):
        zmin, _, denom = _log_resp(points[start:start + _CHUNK], means, inv2t2)
        vals = const + zmin - np.log(denom)
        nll_sum += float(vals.sum())
        nll_sq_sum += float(np.square(vals).sum())
    return nll_sum, nll_sq_sum


def lloyd_accumulate(points, means):
    """Nearest-center pass: (cost_sum, cost_sq_sum, counts, sums, labels).

    Ties go to the lowest component index (argmin keeps the first minimum).
    """
    n, d = points.shape
    K = means.shape[0]
    cost_sum = 0.0
    cost_sq_sum = 0.0
    counts = np.zeros(K)
    sums = np.zeros((K, d))
    labels = np.empty(n, dtype=np.int64)
    for start in range(0, n, _CHUNK):
        chunk = points[start:start + _CHUNK]
        diff = chunk[:, None, :] - means[None, :, :]
        z = np.square(diff).sum(axis=2)
        lab = z.argmin(axis=1)
        cost = z[np.arange(chunk.shape[0]), lab]
        cost_sum += float(cost.sum())
        cost_sq_sum += float(np.square(cost).sum())
        counts += np.bincount(lab, minlength=K).astype(float)
        for k in range(K):
            sel = lab == k
            if sel.any():
                sums[k] += chunk[sel].sum(axis=0)
        labels[start:start + chunk.shape[0]] = lab
    return cost_sum, cost_sq_sum, counts, sums, labels
