"""Command-line front end: `mismix <experiment> [options]`.

Each experiment writes results.csv + manifest.json (+ theory.csv where a
closed-form overlay exists) and a plot_results.py quick-look stub into the
output directory.  Configs are flat JSON key-value files (schema_version 1);
a manifest.json from a previous run is accepted as a config, which makes
any output directory self-reproducing.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .experiments import EXPERIMENTS, run_experiment, spec_from_config

_PLOT_STUB = '''#!/usr/bin/env python3
"""Quick-look plots for this sweep directory (edit freely).

results.csv is long-format: <coords...>,metric,value,std_error,n_trials,seed.
theory.csv (when present) holds closed-form overlays on the same grid.
"""
import csv
import math
import os
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read_long(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return rows


rows = read_long(os.path.join(HERE, "results.csv"))
coord_names = [c for c in rows[0] if c not in ("metric", "value", "std_error", "n_trials", "seed")]

if len(coord_names) == 2 and {"snr", "rho_sq"} == set(coord_names):
    # phase diagram: heatmap of mse_db over (snr, rho_sq)
    xs = sorted({float(r["snr"]) for r in rows})
    ys = sorted({float(r["rho_sq"]) for r in rows})
    grid = [[math.nan] * len(xs) for _ in ys]
    for r in rows:
        if r["metric"] == "mse_db":
            grid[ys.index(float(r["rho_sq"]))][xs.index(float(r["snr"]))] = float(r["value"])
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.pcolormesh(xs, ys, grid, shading="nearest")
    ax.set_xscale("log"); ax.set_yscale("log")
    ax.set_xlabel("snr"); ax.set_ylabel("rho_sq")
    fig.colorbar(im, label="mse_db")
    theory = os.path.join(HERE, "theory.csv")
    if os.path.exists(theory):
        t = read_long(theory)
        ax.plot([float(r["snr"]) for r in t], [float(r["rho_sq_threshold"]) for r in t],
                "w--", lw=1.5, label="collapse threshold")
        ax.legend(loc="upper left")
    fig.savefig(os.path.join(HERE, "phase_diagram.png"), dpi=150, bbox_inches="tight")
    print("wrote phase_diagram.png")
else:
    # generic: one line per metric against the first coordinate
    x_name = coord_names[0]
    series = defaultdict(list)
    for r in rows:
        series[r["metric"]].append((float(r[x_name]), float(r["value"]), float(r["std_error"])))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for metric, pts in sorted(series.items()):
        pts.sort()
        xs = [p[0] for p in pts]; vals = [p[1] for p in pts]; errs = [p[2] for p in pts]
        ax.errorbar(xs, vals, yerr=errs, label=metric, marker="o", ms=3, lw=1)
    ax.set_xscale("log")
    if all(v > 0 for pts in series.values() for _, v, _ in pts):
        ax.set_yscale("log")
    ax.set_xlabel(x_name); ax.legend(fontsize=7)
    fig.savefig(os.path.join(HERE, "curves.png"), dpi=150, bbox_inches="tight")
    print("wrote curves.png")
'''


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mismix",
        description="Sweep experiments for mixture mean estimation under a misspecified noise scale.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="|".join(EXPERIMENTS))
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} sweep")
        p.add_argument("--config", metavar="FILE",
                       help="flat JSON config (or a manifest.json from a previous run)")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel worker processes (default: MISMIX_WORKERS or 1)")
        p.add_argument("--out", metavar="DIR", default=None,
                       help="output directory (default mismix-<experiment>)")
        p.add_argument("--resume", action="store_true",
                       help="recompute only cells missing from DIR's journal (same config required)")
        p.add_argument("--quiet", action="store_true", help="suppress per-cell progress")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    config = None
    if args.config:
        with open(args.config) as fh:
            config = json.load(fh)
    try:
        spec = spec_from_config(args.experiment, config, seed=args.seed, workers=args.workers)
    except (ValueError, KeyError) as exc:
        print(f"mismix: bad config: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out or f"mismix-{args.experiment}"

    def progress(i, total, cell):
        if not args.quiet:
            coords = ", ".join(f"{k}={v:.4g}" for k, v in cell.coords)
            print(f"[{i}/{total}] {coords}", file=sys.stderr)

    manifest = run_experiment(spec, out_dir, resume=args.resume,
                              workers=args.workers, progress=progress)
    stub_path = os.path.join(out_dir, "plot_results.py")
    with open(stub_path, "w") as fh:
        fh.write(_PLOT_STUB)
    print(f"wrote {os.path.join(out_dir, 'results.csv')}")
    if os.path.exists(os.path.join(out_dir, "theory.csv")):
        print(f"wrote {os.path.join(out_dir, 'theory.csv')}")
    print(f"wrote {os.path.join(out_dir, 'manifest.json')}")
    print(f"wrote {stub_path}")
    print(f"{manifest['n_cells']} cells in {manifest['runtime_seconds']:.1f}s "
          f"(backend: {manifest['kernel_backend']})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
