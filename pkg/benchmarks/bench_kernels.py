"""Time the compiled kernels against the numpy fallback on identical inputs.

Run as a script:  python benchmarks/bench_kernels.py [--n 1000000] [--d 8] [--k 2]

Both implementations see the same arrays; the table reports best-of-`repeats`
wall time per call, throughput, and the max absolute disagreement of the
scalar accumulators (the compiled path uses compensated summation, so tiny
differences are expected).
"""

import argparse
import time

import numpy as np

from mismix import MeanConfig, MixtureModel, sample_gmm
from mismix import _kernels_np

try:
    from mismix import _fastkernels
except ImportError:
    _fastkernels = None


def _best_time(fn, args, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--d", type=int, default=8)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--tau", type=float, default=1.0)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    means = MeanConfig(rng.standard_normal((args.k, args.d)))
    sample = sample_gmm(MixtureModel(means, 1.0), args.n, args.seed)
    obs = sample.observations
    mu = means.means.copy()  # writable for the compiled buffers

    kernels = [
        ("em_accumulate", (obs, mu, args.tau)),
        ("nll_accumulate", (obs, mu, args.tau)),
        ("lloyd_accumulate", (obs, mu)),
    ]

    print(f"n={args.n} d={args.d} K={args.k} tau={args.tau} "
          f"(best of {args.repeats}, {obs.nbytes / 1e6:.0f} MB of observations)")
    print(f"{'kernel':<18} {'numpy':>10} {'cython':>10} {'speedup':>8}  {'max |diff|':>10}")
    for name, call_args in kernels:
        t_np, out_np = _best_time(getattr(_kernels_np, name), call_args, args.repeats)
        row = f"{name:<18} {t_np * 1e3:>8.1f}ms"
        if _fastkernels is None:
            print(row + "    (compiled extension not built)")
            continue
        t_cy, out_cy = _best_time(getattr(_fastkernels, name), call_args, args.repeats)
        diff = max(
            float(np.max(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))))
            for a, b in zip(out_np, out_cy)
        )
        print(row + f" {t_cy * 1e3:>8.1f}ms {t_np / t_cy:>7.1f}x  {diff:>10.2e}")


if __name__ == "__main__":
    main()
