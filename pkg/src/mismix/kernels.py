"""Backend selection for the finite-sample inner loops.

Prefers the compiled extension when it imported cleanly, falling back to the
numpy implementation otherwise.  MISMIX_BACKEND=cython|python forces a
choice (forcing cython on a host without the built extension is an error
rather than a silent fallback).
"""

import os

import numpy as np

from . import _kernels_np

_requested = os.environ.get("MISMIX_BACKEND", "").strip().lower()

if _requested in ("", "cython"):
    try:
        from . import _fastkernels as _impl

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "MISMIX_BACKEND=cython but the mismix._fastkernels extension "
                "is not built; install with a C toolchain or unset MISMIX_BACKEND"
            )
        _impl = _kernels_np
        BACKEND = "python"
elif _requested in ("python", "numpy"):
    _impl = _kernels_np
    BACKEND = "python"
else:
    raise ValueError(f"unrecognized MISMIX_BACKEND={_requested!r} (use 'cython' or 'python')")


def _prep(arr) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {out.shape}")
    if not out.flags.writeable:  # compiled kernels take non-const buffers
        out = out.copy()
    return out


def em_accumulate(points, means, tau):
    """(nll_sum, nll_sq_sum, resp_sums, weighted_sums) over all points."""
    return _impl.em_accumulate(_prep(points), _prep(means), float(tau))


def nll_accumulate(points, means, tau):
    """(nll_sum, nll_sq_sum) of the per-point mismatched NLL."""
    return _impl.nll_accumulate(_prep(points), _prep(means), float(tau))


def lloyd_accumulate(points, means):
    """(cost_sum, cost_sq_sum, counts, sums, labels) of a nearest-center pass."""
    return _impl.lloyd_accumulate(_prep(points), _prep(means))
