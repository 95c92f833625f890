"""Experiment specs: parse, run (optionally as a sweep) and summarize.

A spec is a YAML (or JSON) mapping with four blocks::

    problem:  {kind: simple_similarity, n: 100, d: 50, r: 20, lam: 0.01, seed: 0}
    solver:   {algorithm: adarhd_r, mode: cg, T: 1000, a0: 2, b0: 2, c0: 2}
    sweep:    {step_sizes: [0.2, 1, 2, 10, 20], seeds: [0, 1, 2, 3, 4], workers: 2}
    output:   {dir: runs/similarity}

``sweep`` is optional.  A step size ``s`` sets ``a0 = b0 = c0 = s`` for the
adaptive solvers and ``eta_x = eta_y = s`` for RHGD; a sweep seed replaces
``problem.seed`` (fresh data and initial point).  Relative output directories
are resolved against ``$ADARHD_OUTPUT_ROOT`` when it is set.
"""
from __future__ import annotations

import copy
import csv
import itertools
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .adarhd import AdaRHDConfig, run_adarhd, run_minmax
from .baselines import RHGDConfig, run_rhgd
from .benchmarks import (
    make_robust,
    make_saddle,
    make_shallow_hyperrep,
    make_simple_similarity,
    make_toy_quadratic,
)
from .errors import ConfigError, DivergenceError
from .trace import RunTrace, ergodic_min_gradnorm

OUTPUT_ROOT_ENV = "ADARHD_OUTPUT_ROOT"
THRESHOLDS = (1e-2, 1e-3, 1e-4)
MAX_SWEEP_RUNS = 10_000
NEVER = "/"

# problem kind -> (factory, accepted parameters)
PROBLEMS = {
    "toy_quadratic": (lambda nx=2, ny=2, seed=0, C=None: make_toy_quadratic(nx, ny, seed, C),
                      {"nx", "ny", "seed", "C"}),
    "saddle": (lambda n=1, seed=0: make_saddle(n), {"n", "seed"}),
    "simple_similarity": (lambda n=100, d=50, r=20, lam=0.01, seed=0: make_simple_similarity(n, d, r, lam, seed)[0],
                          {"n", "d", "r", "lam", "seed"}),
    "shallow_hyperrep": (lambda n=200, d=50, r=10, lam=0.1, noise_sd=0.1, seed=0:
                         make_shallow_hyperrep(n, d, r, lam, noise_sd, seed)[0],
                         {"n", "d", "r", "lam", "noise_sd", "seed"}),
    "robust": (lambda loss_kind="karcher_mean", n=10, d=20, seed=0: make_robust(loss_kind, n, d, seed)[0],
               {"loss_kind", "n", "d", "seed"}),
}
ALGORITHMS = ("adarhd", "adarhd_r", "rhgd", "minmax")
_ADA_KEYS = {"T", "a0", "b0", "c0", "mode", "map_mode", "eps_y", "eps_v", "inner_cap", "cg_tol", "cg_cap",
             "reset_accumulators", "early_stop", "early_stop_hypergrad_sq", "track_error", "error_every",
             "divergence_threshold", "seed"}
_RHGD_KEYS = {"T", "eta_x", "eta_y", "inner_iters", "cg_tol", "cg_cap", "map_mode", "track_error",
              "error_every", "divergence_threshold", "seed", "mode"}


class SpecError(ConfigError):
    """Invalid experiment spec; the message names the offending field or line."""


@dataclass
class ExperimentSpec:
    problem: dict
    solver: dict
    sweep: Optional[dict] = None
    output: dict = field(default_factory=lambda: {"dir": "runs"})

    @property
    def output_dir(self) -> Path:
        path = Path(self.output.get("dir", "runs"))
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not path.is_absolute():
            path = Path(root) / path
        return path

    def to_dict(self) -> dict:
        out = {"problem": self.problem, "solver": self.solver, "output": self.output}
        if self.sweep is not None:
            out["sweep"] = self.sweep
        return out


# ------------------------------------------------------------------- parsing

def load_spec(path) -> ExperimentSpec:
    """Read and validate a YAML/JSON spec file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"{path}: cannot read spec ({exc.strerror})") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark is not None else "unknown position"
        raise SpecError(f"{path}: parse error at {where}: {getattr(exc, 'problem', exc)}") from exc
    return parse_spec(raw, source=str(path))


def parse_spec(raw, source: str = "<spec>") -> ExperimentSpec:
    if not isinstance(raw, dict):
        raise SpecError(f"{source}: top level must be a mapping with problem/solver blocks")
    unknown = set(raw) - {"problem", "solver", "sweep", "output"}
    if unknown:
        raise SpecError(f"{source}: unknown top-level field(s) {sorted(unknown)}")
    for block in ("problem", "solver"):
        if not isinstance(raw.get(block), dict):
            raise SpecError(f"{source}: field '{block}' is required and must be a mapping")
    problem, solver = dict(raw["problem"]), dict(raw["solver"])

    kind = problem.get("kind")
    if kind not in PROBLEMS:
        raise SpecError(f"{source}: problem.kind must be one of {sorted(PROBLEMS)}, got {kind!r}")
    extra = set(problem) - PROBLEMS[kind][1] - {"kind"}
    if extra:
        raise SpecError(f"{source}: problem.{sorted(extra)[0]} is not a parameter of {kind}")

    algo = solver.get("algorithm")
    if algo not in ALGORITHMS:
        raise SpecError(f"{source}: solver.algorithm must be one of {list(ALGORITHMS)}, got {algo!r}")
    allowed = _RHGD_KEYS if algo == "rhgd" else _ADA_KEYS
    extra = set(solver) - allowed - {"algorithm"}
    if extra:
        raise SpecError(f"{source}: solver.{sorted(extra)[0]} is not an option of {algo}")
    if "T" not in solver:
        raise SpecError(f"{source}: solver.T is required")

    sweep = raw.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict):
            raise SpecError(f"{source}: sweep must be a mapping")
        extra = set(sweep) - {"step_sizes", "seeds", "workers"}
        if extra:
            raise SpecError(f"{source}: sweep.{sorted(extra)[0]} is not a sweep option")
        for key in ("step_sizes", "seeds"):
            if key in sweep and not isinstance(sweep[key], list):
                raise SpecError(f"{source}: sweep.{key} must be a list")
        n_runs = len(sweep.get("step_sizes", [None])) * len(sweep.get("seeds", [None]))
        if n_runs > MAX_SWEEP_RUNS:
            raise SpecError(f"{source}: sweep has {n_runs} runs (limit {MAX_SWEEP_RUNS})")
    output = raw.get("output") or {"dir": "runs"}
    if not isinstance(output, dict):
        raise SpecError(f"{source}: output must be a mapping")
    spec = ExperimentSpec(problem, solver, sweep, output)
    try:
        for job in expand(spec):
            _solver_config(job["solver"])
    except ConfigError as exc:
        raise SpecError(f"{source}: solver: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{source}: solver: {exc}") from exc
    return spec


# ------------------------------------------------------------------- running

def build_problem(block: dict):
    block = dict(block)
    factory, _ = PROBLEMS[block.pop("kind")]
    return factory(**block)


def _solver_config(solver: dict):
    s = dict(solver)
    algo = s.pop("algorithm")
    if algo == "rhgd":
        s.pop("mode", None)
        return RHGDConfig(**s)
    mode = s.pop("mode", "gd")
    if "inner_cap" in s:
        s["inner_cap_schedule"] = s.pop("inner_cap")
    s.setdefault("map_mode", "retract" if algo == "adarhd_r" else "exp")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return AdaRHDConfig(inner_mode=mode, **s)


def expand(spec: ExperimentSpec) -> list:
    """Concrete run descriptions (problem block, solver block, key) for a spec."""
    sweep = spec.sweep or {}
    steps = sweep.get("step_sizes", [None])
    seeds = sweep.get("seeds", [None])
    jobs = []
    for step, seed in itertools.product(steps, seeds):
        problem = copy.deepcopy(spec.problem)
        solver = copy.deepcopy(spec.solver)
        if seed is not None:
            problem["seed"] = int(seed)
        if step is not None:
            names = ("eta_x", "eta_y") if solver["algorithm"] == "rhgd" else ("a0", "b0", "c0")
            for name in names:
                solver[name] = float(step)
            if solver["algorithm"] != "rhgd" and solver.get("mode") == "cg":
                solver.pop("c0")
        jobs.append({"problem": problem, "solver": solver, "key": run_key(problem, solver)})
    return sorted(jobs, key=lambda j: j["key"])


def run_key(problem: dict, solver: dict) -> str:
    algo = solver["algorithm"]
    if algo == "rhgd":
        name = f"rhgd{solver.get('inner_iters', 50)}_eta{solver.get('eta_x', 0.5):g}"
    else:
        name = f"{algo}-{solver.get('mode', 'gd')}_a{solver.get('a0', 1.0):g}"
    return f"{problem['kind']}_{name}_seed{problem.get('seed', 0)}"


def group_key(key: str) -> str:
    return key.rsplit("_seed", 1)[0]


def execute(job: dict, out_dir) -> dict:
    """Run one job, write ``<key>.csv`` and ``<key>.json``; return its summary."""
    problem = build_problem(job["problem"])
    config = _solver_config(job["solver"])
    algo = job["solver"]["algorithm"]
    try:
        if algo == "rhgd":
            trace = run_rhgd(problem, config)
        elif algo == "minmax":
            trace = run_minmax(problem, config)
        else:
            trace = run_adarhd(problem, config)
    except DivergenceError as exc:
        trace = exc.trace if exc.trace is not None else RunTrace(status="diverged")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    key = job["key"]
    trace.to_csv(out_dir / f"{key}.csv")
    summary = run_summary(trace)
    sidecar = trace.to_json()
    sidecar.pop("rows")
    sidecar.update({"key": key, "group": group_key(key), "problem": job["problem"],
                    "solver": job["solver"], "summary": summary})
    (out_dir / f"{key}.json").write_text(json.dumps(_jsonable(sidecar), indent=1))
    return {"key": key, **summary}


def run_summary(trace: RunTrace) -> dict:
    finite = [r.hypergrad_sq for r in trace.rows if math.isfinite(r.hypergrad_sq)]
    return {
        "status": trace.status,
        "iterations": len(trace.rows),
        "final_ergodic_min_gradnorm": min(finite) if finite else None,
        "wall_time": trace.rows[-1].time_s if trace.rows else 0.0,
        "final_upper_obj": trace.rows[-1].upper_obj if trace.rows else None,
    }


def _execute_star(args):
    return execute(*args)


def run_experiment(spec: ExperimentSpec, workers: Optional[int] = None) -> list:
    """Run every job of ``spec``; writes traces, ``summary.json`` and, for sweeps, ``table.csv``."""
    jobs = expand(spec)
    out_dir = spec.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    if workers is None:
        workers = int((spec.sweep or {}).get("workers", 1))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_execute_star, [(job, out_dir) for job in jobs]))
    else:
        results = [execute(job, out_dir) for job in jobs]
    results.sort(key=lambda r: r["key"])
    (out_dir / "summary.json").write_text(json.dumps(_jsonable({"spec": spec.to_dict(), "runs": results}),
                                                     indent=1))
    if spec.sweep is not None:
        write_table(summarize(out_dir), out_dir / "table.csv")
    return results


# ----------------------------------------------------------------- summaries

def time_to_threshold(trace: RunTrace, threshold: float) -> Optional[float]:
    """Wall time at which the ergodic min-grad-norm first drops to ``threshold``."""
    if not trace.rows:
        return None
    erg = ergodic_min_gradnorm(trace)
    hit = np.flatnonzero(erg <= threshold)
    if hit.size == 0:
        return None
    return float(trace.rows[hit[0]].time_s)


def load_traces(directory) -> list:
    """``(group, RunTrace)`` pairs for every ``*.csv`` trace with a JSON sidecar."""
    out = []
    for csv_path in sorted(Path(directory).glob("*.csv")):
        side = csv_path.with_suffix(".json")
        if not side.exists():
            continue
        meta = json.loads(side.read_text())
        trace = RunTrace.from_csv(csv_path, algorithm=meta.get("algorithm", ""))
        if meta.get("status") == "diverged":
            trace.status = "diverged"
        out.append((meta.get("group", csv_path.stem), trace))
    return out


def summarize(directory, thresholds=THRESHOLDS) -> list:
    """Per-configuration time-to-threshold rows (mean and std over seeds).

    A threshold shows ``"/"`` unless every seed of the configuration reached
    it (a diverged run reaches nothing).
    """
    groups = {}
    for group, trace in load_traces(directory):
        groups.setdefault(group, []).append(trace)
    if not groups:
        raise FileNotFoundError(f"no traces found in {directory}")
    rows = []
    for group in sorted(groups):
        traces = groups[group]
        row = {"config": group, "runs": len(traces),
               "diverged": sum(t.status == "diverged" for t in traces)}
        for thr in thresholds:
            times = [time_to_threshold(t, thr) for t in traces]
            if any(t is None for t in times):
                row[f"{thr:g}"] = NEVER
            else:
                row[f"{thr:g}"] = f"{np.mean(times):.4g} ({np.std(times):.2g})"
        rows.append(row)
    return rows


def write_table(rows: list, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def format_table(rows: list) -> str:
    cols = list(rows[0])
    widths = [max(len(c), *(len(str(r[c])) for r in rows)) for c in cols]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(str(r[c]).ljust(w) for c, w in zip(cols, widths)) for r in rows]
    return "\n".join(lines)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj
