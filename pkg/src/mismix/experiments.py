"""Sweep runners and artifact writers for the experiment CLI.

Each experiment is a grid of independent cells.  Every cell derives its own
random stream from (master_seed, grid indices, purpose), so results are
invariant to worker count and execution order, partially completed sweeps
can be resumed by recomputing only missing cells, and rerunning a finished
sweep reproduces results.csv byte for byte (floats are serialized with
repr, row order is lexicographic in grid indices).

Experiments
-----------
phase-diagram      population quasi-MLE error over (snr, rho_sq), multi-start
                   (truth / 0.01*truth collapse-basin / random), best objective
                   kept; per-start errors recorded, collapse threshold overlay.
mse-vs-sigma       finite-sample EM (tau = sigma) and Lloyd from truth init
                   over (sigma_sq, n), mean normalized MSE over trials.
clustering-vs-snr  Monte Carlo Bayes error against the bound pair (and the
                   K=2 closed form when applicable).
ha-vs-theory       finite-sample Lloyd MSE against the exact hard-assignment
                   closed form and its two asymptotes (symmetric K=2 model).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import multiprocessing
import os
import subprocess
import time
from dataclasses import dataclass, replace

import numpy as np

from . import __version__ as _pkg_version
from . import kernels
from .clustering import bayes_error_mc, error_bounds
from .estimators import EmConfig, em_fit, lloyd_fit
from .k2 import K2Model, bayes_error_k2, ha_mse_asymptote, ha_mse_k2
from .model import MeanConfig, MixtureModel, geometry, normalized_mse, rng_for, sample_gmm
from .population import FitSpec, collapse_report, fit_quasi_mle, make_regular_simplex

__all__ = [
    "SCHEMA_VERSION",
    "EXPERIMENTS",
    "AxisSpec",
    "SweepSpec",
    "CellResult",
    "spec_from_config",
    "spec_to_config",
    "run_phase_diagram",
    "run_mse_vs_sigma",
    "run_clustering_vs_snr",
    "run_ha_vs_theory",
    "run_experiment",
    "aggregate_and_write",
]

SCHEMA_VERSION = 1

EXPERIMENTS = ("phase-diagram", "mse-vs-sigma", "clustering-vs-snr", "ha-vs-theory")

_PRESETS = ("symmetric-k2", "simplex", "gaussian", "custom")

_MSE_DB_FLOOR = 1e-300  # mse is floored here before 10*log10 so zeros stay finite


# ---------------------------------------------------------------------------
# sweep specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AxisSpec:
    """One grid axis: `points` values from min to max, linear or log spaced."""

    name: str
    scale: str  # "linear" | "log"
    min: float
    max: float
    points: int

    def __post_init__(self):
        if self.scale not in ("linear", "log"):
            raise ValueError(f"axis scale must be 'linear' or 'log', got {self.scale!r}")
        if self.points < 1:
            raise ValueError("axis needs at least one point")
        if not (np.isfinite(self.min) and np.isfinite(self.max) and self.min <= self.max):
            raise ValueError(f"bad axis range [{self.min}, {self.max}]")
        if self.scale == "log" and self.min <= 0:
            raise ValueError("log axis needs positive endpoints")

    def values(self) -> np.ndarray:
        if self.points == 1:
            return np.array([self.min])
        if self.scale == "linear":
            return np.linspace(self.min, self.max, self.points)
        return np.power(10.0, np.linspace(math.log10(self.min), math.log10(self.max), self.points))


@dataclass(frozen=True)
class SweepSpec:
    """Everything needed to reproduce a sweep (mirrors the flat config file)."""

    experiment: str
    axes: tuple  # tuple[AxisSpec, ...]
    n_list: tuple = (10_000,)  # sample sizes for finite-sample experiments
    trials: int = 8  # repetitions per cell (finite-sample experiments)
    master_seed: int = 0
    preset: str = "symmetric-k2"
    preset_k: int = 3  # components (simplex / gaussian presets)
    preset_d: int = 1  # ambient dimension
    preset_beta: float = 1.0  # simplex scale
    preset_norm: float = 1.0  # ||mu|| for symmetric-k2, scale for gaussian
    means_csv: str | None = None  # custom preset: path to a mean-config CSV
    workers: int = 0  # 0 = resolve from MISMIX_WORKERS, default 1
    quadrature_nodes: int = 200
    mc_samples: int = 1_000_000
    max_iters: int = 500

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.preset not in _PRESETS:
            raise ValueError(f"preset must be one of {_PRESETS}, got {self.preset!r}")
        if self.preset == "custom" and not self.means_csv:
            raise ValueError("preset='custom' requires means_csv")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ValueError(f"bad n_list {self.n_list}")
        object.__setattr__(self, "axes", tuple(self.axes))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))

    def axis(self, name: str) -> AxisSpec:
        for a in self.axes:
            if a.name == name:
                return a
        raise KeyError(f"no axis named {name!r} in {self.experiment}")

    def base_means(self) -> MeanConfig:
        """The (sigma-independent) truth means for this sweep's preset."""
        if self.preset == "symmetric-k2":
            u = np.zeros(self.preset_d)
            u[0] = self.preset_norm
            return MeanConfig(np.vstack([u, -u]))
        if self.preset == "simplex":
            return make_regular_simplex(self.preset_k, self.preset_d, self.preset_beta)
        if self.preset == "gaussian":
            rng = rng_for(self.master_seed, "model-means")
            return MeanConfig(self.preset_norm * rng.standard_normal((self.preset_k, self.preset_d)))
        return MeanConfig.from_csv(self.means_csv)


@dataclass(frozen=True)
class CellResult:
    """One grid cell: coordinates, metric rows, and the cell's derived seed."""

    key: tuple  # grid indices, used for ordering and resume bookkeeping
    coords: tuple  # ((axis_name, value), ...)
    metrics: tuple  # ((metric, value, std_error, n_trials), ...)
    seed: int


# ---------------------------------------------------------------------------
# config file round trip
# ---------------------------------------------------------------------------

_AXIS_DEFAULTS = {
    # the phase-diagram grid is the headline default: snr x rho^2, log-log
    "phase-diagram": (
        AxisSpec("snr", "log", 1e-3, 1e2, 25),
        AxisSpec("rho_sq", "log", 1e-2, 1e2, 25),
    ),
    "mse-vs-sigma": (AxisSpec("sigma_sq", "log", 1e-2, 1e2, 9),),
    "clustering-vs-snr": (AxisSpec("snr", "log", 1e-2, 1e2, 13),),
    "ha-vs-theory": (AxisSpec("snr", "log", 1e-3, 2.5e1, 11),),
}

_SPEC_KEYS = (
    "experiment", "n_list", "trials", "master_seed", "preset", "preset_k",
    "preset_d", "preset_beta", "preset_norm", "means_csv", "workers",
    "quadrature_nodes", "mc_samples", "max_iters",
)


def _default_spec(experiment: str) -> SweepSpec:
    defaults = {
        "phase-diagram": dict(trials=1, preset_d=1),
        "mse-vs-sigma": dict(trials=8, preset_d=8, n_list=(10_000,)),
        "clustering-vs-snr": dict(trials=1, preset_d=2, n_list=(1_000_000,)),
        "ha-vs-theory": dict(trials=4, preset_d=1, n_list=(1_000_000,)),
    }[experiment]
    return SweepSpec(experiment=experiment, axes=_AXIS_DEFAULTS[experiment], **defaults)


def spec_from_config(experiment: str, config: dict | None = None, *,
                     seed: int | None = None, workers: int | None = None) -> SweepSpec:
    """Build a SweepSpec from a flat config mapping (e.g. a parsed JSON file).

    Recognized keys are the SweepSpec fields plus, per axis NAME,
    NAME_scale/NAME_min/NAME_max/NAME_points.  A manifest.json produced by a
    previous run is also accepted (its embedded "spec" is used).  Unknown
    keys are an error; schema_version must match when present.
    """
    spec = _default_spec(experiment)
    if config is None:
        config = {}
    if "spec" in config and isinstance(config["spec"], dict):
        config = config["spec"]  # manifest round trip
    config = dict(config)
    version = config.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"config schema_version {version} != supported {SCHEMA_VERSION}")
    cfg_experiment = config.pop("experiment", experiment)
    if cfg_experiment != experiment:
        raise ValueError(f"config is for experiment {cfg_experiment!r}, not {experiment!r}")
    axes = []
    for ax in spec.axes:
        fields = {}
        for part in ("scale", "min", "max", "points"):
            key = f"{ax.name}_{part}"
            if key in config:
                fields[part] = config.pop(key)
        axes.append(replace(ax, **fields) if fields else ax)
    updates: dict = {"axes": tuple(axes)}
    for key in _SPEC_KEYS[1:]:
        if key in config:
            value = config.pop(key)
            updates[key] = tuple(value) if key == "n_list" else value
    if config:
        raise ValueError(f"unrecognized config keys: {sorted(config)}")
    spec = replace(spec, **updates)
    if seed is not None:
        spec = replace(spec, master_seed=int(seed))
    if workers is not None:
        spec = replace(spec, workers=int(workers))
    return spec


def spec_to_config(spec: SweepSpec) -> dict:
    """Flat config dict (round-trips through spec_from_config)."""
    out = {"schema_version": SCHEMA_VERSION, "experiment": spec.experiment}
    for ax in spec.axes:
        out[f"{ax.name}_scale"] = ax.scale
        out[f"{ax.name}_min"] = ax.min
        out[f"{ax.name}_max"] = ax.max
        out[f"{ax.name}_points"] = ax.points
    for key in _SPEC_KEYS[1:]:
        out[key] = getattr(spec, key)
    out["n_list"] = list(spec.n_list)
    return out


# ---------------------------------------------------------------------------
# per-cell computations
# ---------------------------------------------------------------------------


def _sigma_for_snr(base: MeanConfig, snr: float) -> float:
    tr = float(np.trace(geometry(MixtureModel(base, 1.0)).sigma_mu))
    if tr <= 0:
        raise ValueError("preset means carry no signal; cannot target an SNR")
    return math.sqrt(tr / snr)


def _cell_seed(spec: SweepSpec, key: tuple) -> int:
    return int(rng_for(spec.master_seed, "cell", *key).integers(2**62))


def _mse_db(mse: float) -> float:
    return 10.0 * math.log10(max(mse, _MSE_DB_FLOOR))


def _phase_cell(spec: SweepSpec, key, snr, rho_sq) -> CellResult:
    base = spec.base_means()
    sigma = _sigma_for_snr(base, snr)
    truth = MixtureModel(base, sigma)
    tau = sigma * math.sqrt(rho_sq)
    fit_spec = FitSpec(
        tau=tau,
        quadrature_nodes=spec.quadrature_nodes,
        mc_samples=spec.mc_samples,
        max_iters=spec.max_iters,
        seed=_cell_seed(spec, key),
    )
    rng = rng_for(spec.master_seed, "phase-random-init", *key)
    scale = base.frobenius_norm / math.sqrt(base.n_components)
    starts = {
        "truth": base,
        "collapse": MeanConfig(0.01 * base.means),
        "random": MeanConfig(scale * rng.standard_normal(base.means.shape)),
    }
    fits = {name: fit_quasi_mle(truth, fit_spec, init) for name, init in starts.items()}
    best_name = min(fits, key=lambda name: fits[name].objective.value)
    best = fits[best_name]
    mse = normalized_mse(best.means, base)
    report = collapse_report(truth)
    metrics = [
        ("mse", mse, 0.0, 1),
        ("mse_db", _mse_db(mse), 0.0, 1),
        ("objective", best.objective.value, best.objective.std_error, 1),
        ("mse_init_truth", normalized_mse(fits["truth"].means, base), 0.0, 1),
        ("mse_init_collapse", normalized_mse(fits["collapse"].means, base), 0.0, 1),
        ("mse_init_random", normalized_mse(fits["random"].means, base), 0.0, 1),
        ("converged", 1.0 if best.converged else 0.0, 0.0, 1),
        ("rho_sq_threshold", report.rho_sq_threshold, 0.0, 1),
    ]
    coords = (("snr", float(snr)), ("rho_sq", float(rho_sq)))
    return CellResult(key=key, coords=coords, metrics=tuple(metrics), seed=fit_spec.seed)


def _mse_cell(spec: SweepSpec, key, sigma_sq, n) -> CellResult:
    base = spec.base_means()
    sigma = math.sqrt(sigma_sq)
    truth = MixtureModel(base, sigma)
    cfg = EmConfig(tau=sigma, init="truth", init_means=base, max_iters=spec.max_iters)
    em_vals, lloyd_vals, em_iters = [], [], []
    for trial in range(spec.trials):
        sample = sample_gmm(truth, n, rng_for(spec.master_seed, "mse-data", *key, trial).integers(2**63))
        em = em_fit(sample, base.n_components, cfg)
        ll = lloyd_fit(sample, base.n_components, cfg)
        em_vals.append(normalized_mse(em.means, base))
        lloyd_vals.append(normalized_mse(ll.means, base))
        em_iters.append(em.iters_used)
    metrics = []
    for name, vals in (("em_mse", em_vals), ("lloyd_mse", lloyd_vals)):
        mean = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        metrics.append((name, mean, se, len(vals)))
        metrics.append((name + "_db", _mse_db(mean), 0.0, len(vals)))
    metrics.append(("em_iters", float(np.mean(em_iters)), 0.0, len(em_iters)))
    coords = (("sigma_sq", float(sigma_sq)), ("n", float(n)))
    return CellResult(key=key, coords=coords, metrics=tuple(metrics), seed=_cell_seed(spec, key))


def _clustering_cell(spec: SweepSpec, key, snr) -> CellResult:
    base = spec.base_means()
    sigma = _sigma_for_snr(base, snr)
    truth = MixtureModel(base, sigma)
    n = spec.n_list[0]
    est = bayes_error_mc(truth, n, rng_for(spec.master_seed, "clustering", *key).integers(2**63))
    bounds = error_bounds(truth)
    metrics = [
        ("p_err", est.p_err, est.std_error, 1),
        ("lower", bounds.lower, 0.0, 1),
        ("upper", bounds.upper, 0.0, 1),
        ("mi_upper", bounds.mi_upper, 0.0, 1),
        ("mills_diagnostic", bounds.mills_diagnostic, 0.0, 1),
    ]
    if spec.preset == "symmetric-k2":
        metrics.append(("p_err_theory", bayes_error_k2(snr), 0.0, 1))
    return CellResult(key=key, coords=(("snr", float(snr)),), metrics=tuple(metrics),
                      seed=_cell_seed(spec, key))


def _ha_cell(spec: SweepSpec, key, snr, n) -> CellResult:
    if spec.preset != "symmetric-k2":
        raise ValueError("ha-vs-theory compares against the symmetric K=2 closed form; use preset='symmetric-k2'")
    base = spec.base_means()
    sigma = _sigma_for_snr(base, snr)
    truth = MixtureModel(base, sigma)
    model = K2Model(mu=base.means[0], sigma=sigma)
    cfg = EmConfig(tau=sigma, init="truth", init_means=base, max_iters=spec.max_iters)
    vals = []
    for trial in range(spec.trials):
        sample = sample_gmm(truth, n, rng_for(spec.master_seed, "ha-data", *key, trial).integers(2**63))
        ll = lloyd_fit(sample, 2, cfg)
        vals.append(normalized_mse(ll.means, base))
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    metrics = [
        ("lloyd_mse", mean, se, len(vals)),
        ("lloyd_mse_db", _mse_db(mean), 0.0, len(vals)),
        ("ha_mse_theory", ha_mse_k2(model), 0.0, 1),
        ("asymptote_low", ha_mse_asymptote(snr, "low"), 0.0, 1),
        ("asymptote_high", ha_mse_asymptote(snr, "high"), 0.0, 1),
    ]
    coords = (("snr", float(snr)), ("n", float(n)))
    return CellResult(key=key, coords=coords, metrics=tuple(metrics), seed=_cell_seed(spec, key))


# ---------------------------------------------------------------------------
# grid enumeration and execution
# ---------------------------------------------------------------------------


def _cell_tasks(spec: SweepSpec):
    """Lexicographically ordered (key, args) pairs for every grid cell."""
    if spec.experiment == "phase-diagram":
        snrs = spec.axis("snr").values()
        rhos = spec.axis("rho_sq").values()
        return [((i, j), (snrs[i], rhos[j])) for i in range(len(snrs)) for j in range(len(rhos))]
    if spec.experiment == "mse-vs-sigma":
        sig = spec.axis("sigma_sq").values()
        return [((i, j), (sig[i], spec.n_list[j]))
                for i in range(len(sig)) for j in range(len(spec.n_list))]
    if spec.experiment == "clustering-vs-snr":
        snrs = spec.axis("snr").values()
        return [((i,), (snrs[i],)) for i in range(len(snrs))]
    snrs = spec.axis("snr").values()
    return [((i, j), (snrs[i], spec.n_list[j]))
            for i in range(len(snrs)) for j in range(len(spec.n_list))]


_CELL_FN = {
    "phase-diagram": _phase_cell,
    "mse-vs-sigma": _mse_cell,
    "clustering-vs-snr": _clustering_cell,
    "ha-vs-theory": _ha_cell,
}


def _run_one(payload):
    spec, key, args = payload
    return _CELL_FN[spec.experiment](spec, key, *args)


def resolve_workers(spec: SweepSpec, override: int | None = None) -> int:
    """CLI flag > spec.workers > MISMIX_WORKERS env > 1."""
    if override is not None and override > 0:
        return override
    if spec.workers > 0:
        return spec.workers
    env = os.environ.get("MISMIX_WORKERS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"MISMIX_WORKERS={env!r} is not an integer")
    return 1


def _compute_cells(spec: SweepSpec, skip=(), workers: int = 1, on_result=None):
    """Compute all grid cells not in `skip`; yields results as they finish."""
    tasks = [(spec, key, args) for key, args in _cell_tasks(spec) if key not in set(skip)]
    if workers <= 1 or len(tasks) <= 1:
        for payload in tasks:
            result = _run_one(payload)
            if on_result:
                on_result(result)
            yield result
        return
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=min(workers, len(tasks))) as pool:
        for result in pool.imap_unordered(_run_one, tasks):
            if on_result:
                on_result(result)
            yield result


def run_phase_diagram(spec: SweepSpec):
    """All phase-diagram cells, sorted by grid index."""
    assert spec.experiment == "phase-diagram"
    return sorted(_compute_cells(spec, workers=resolve_workers(spec)), key=lambda c: c.key)


def run_mse_vs_sigma(spec: SweepSpec):
    assert spec.experiment == "mse-vs-sigma"
    return sorted(_compute_cells(spec, workers=resolve_workers(spec)), key=lambda c: c.key)


def run_clustering_vs_snr(spec: SweepSpec):
    assert spec.experiment == "clustering-vs-snr"
    return sorted(_compute_cells(spec, workers=resolve_workers(spec)), key=lambda c: c.key)


def run_ha_vs_theory(spec: SweepSpec):
    assert spec.experiment == "ha-vs-theory"
    return sorted(_compute_cells(spec, workers=resolve_workers(spec)), key=lambda c: c.key)


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def _git_commit() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=10,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _theory_rows(spec: SweepSpec):
    """Closed-form overlay rows (header, rows) or None."""
    if spec.experiment == "phase-diagram":
        base = spec.base_means()
        rows = []
        for snr in spec.axis("snr").values():
            sigma = _sigma_for_snr(base, snr)
            rows.append([snr, collapse_report(MixtureModel(base, sigma)).rho_sq_threshold])
        return ["snr", "rho_sq_threshold"], rows
    if spec.experiment == "clustering-vs-snr":
        base = spec.base_means()
        rows = []
        for snr in spec.axis("snr").values():
            truth = MixtureModel(base, _sigma_for_snr(base, snr))
            b = error_bounds(truth)
            row = [snr, b.lower, b.upper, b.mi_upper, b.mills_diagnostic]
            if spec.preset == "symmetric-k2":
                row.append(bayes_error_k2(snr))
            rows.append(row)
        header = ["snr", "lower", "upper", "mi_upper", "mills_diagnostic"]
        if spec.preset == "symmetric-k2":
            header.append("p_err_theory")
        return header, rows
    if spec.experiment == "ha-vs-theory":
        rows = []
        for snr in spec.axis("snr").values():
            model = K2Model(mu=np.array([spec.preset_norm]), sigma=spec.preset_norm / math.sqrt(snr))
            rows.append([snr, ha_mse_k2(model), ha_mse_asymptote(snr, "low"), ha_mse_asymptote(snr, "high")])
        return ["snr", "ha_mse", "asymptote_low", "asymptote_high"], rows
    return None


def aggregate_and_write(spec: SweepSpec, cells, out_dir, runtime_seconds: float | None = None) -> dict:
    """Write results.csv, manifest.json and (when defined) theory.csv.

    Rows are ordered lexicographically by grid index then metric position;
    floats are serialized with repr() so identical runs produce identical
    bytes.  Returns the manifest dict.
    """
    os.makedirs(out_dir, exist_ok=True)
    cells = sorted(cells, key=lambda c: c.key)
    expected = [key for key, _ in _cell_tasks(spec)]
    got = [c.key for c in cells]
    if got != expected:
        missing = sorted(set(expected) - set(got))
        raise ValueError(f"cell set does not match the grid; missing {missing[:5]}...")
    coord_names = [name for name, _ in cells[0].coords] if cells else []
    results_path = os.path.join(out_dir, "results.csv")
    with open(results_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(coord_names + ["metric", "value", "std_error", "n_trials", "seed"])
        for cell in cells:
            coord_vals = [str(int(v)) if name == "n" else repr(v) for name, v in cell.coords]
            for metric, value, se, n_trials in cell.metrics:
                writer.writerow(coord_vals + [metric, repr(float(value)), repr(float(se)),
                                              n_trials, cell.seed])
    theory = _theory_rows(spec)
    if theory is not None:
        header, rows = theory
        with open(os.path.join(out_dir, "theory.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(v)) for v in row])
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "experiment": spec.experiment,
        "spec": spec_to_config(spec),
        "master_seed": spec.master_seed,
        "package_version": _pkg_version,
        "kernel_backend": kernels.BACKEND,
        "git_commit": _git_commit(),
        "n_cells": len(cells),
        "runtime_seconds": runtime_seconds,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# ---------------------------------------------------------------------------
# orchestration (journal + resume)
# ---------------------------------------------------------------------------


def _journal_path(out_dir) -> str:
    return os.path.join(out_dir, "cells.jsonl")


def _spec_digest(spec: SweepSpec) -> str:
    payload = json.dumps(spec_to_config(spec), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _load_journal(out_dir, spec: SweepSpec) -> dict:
    done = {}
    path = _journal_path(out_dir)
    if not os.path.exists(path):
        return done
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "spec_digest" in rec:
                if rec["spec_digest"] != _spec_digest(spec):
                    raise ValueError(
                        f"{path} belongs to a different sweep config; "
                        "rerun without --resume or point --out elsewhere"
                    )
                continue
            cell = CellResult(
                key=tuple(rec["key"]),
                coords=tuple((n, v) for n, v in rec["coords"]),
                metrics=tuple((m, v, s, t) for m, v, s, t in rec["metrics"]),
                seed=rec["seed"],
            )
            done[cell.key] = cell  # later lines win, e.g. after a crashed rerun
    return done


def _append_journal(fh, cell: CellResult):
    fh.write(json.dumps({
        "key": list(cell.key),
        "coords": [[n, v] for n, v in cell.coords],
        "metrics": [[m, v, s, t] for m, v, s, t in cell.metrics],
        "seed": cell.seed,
    }))
    fh.write("\n")
    fh.flush()


def run_experiment(spec: SweepSpec, out_dir, *, resume: bool = False,
                   workers: int | None = None, progress=None) -> dict:
    """Run a sweep end to end: compute cells (resuming if asked), write artifacts.

    A cells.jsonl journal in out_dir records finished cells as they complete;
    with resume=True only missing cells are recomputed.  The final
    results.csv does not depend on worker count or completion order.
    """
    start = time.monotonic()
    os.makedirs(out_dir, exist_ok=True)
    done = _load_journal(out_dir, spec) if resume else {}
    if not resume and os.path.exists(_journal_path(out_dir)):
        os.remove(_journal_path(out_dir))
    n_workers = resolve_workers(spec, workers)
    total = len(_cell_tasks(spec))
    fresh_journal = not os.path.exists(_journal_path(out_dir))
    with open(_journal_path(out_dir), "a") as journal:
        if fresh_journal:
            journal.write(json.dumps({"spec_digest": _spec_digest(spec)}))
            journal.write("\n")
            journal.flush()
        count = len(done)
        for cell in _compute_cells(spec, skip=set(done), workers=n_workers):
            done[cell.key] = cell
            _append_journal(journal, cell)
            count += 1
            if progress:
                progress(count, total, cell)
    cells = sorted(done.values(), key=lambda c: c.key)
    return aggregate_and_write(spec, cells, out_dir, runtime_seconds=time.monotonic() - start)
