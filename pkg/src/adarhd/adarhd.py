"""Outer loop of adaptive Riemannian hypergradient descent.

One configuration covers four variants: the linear system is solved either by
adaptive gradient descent (``inner_mode="gd"``) or conjugate gradient
(``"cg"``), and both levels move with the exponential map (``map_mode="exp"``)
or a retraction (``"retract"``).  :func:`run_minmax` is the specialization to
``min_x max_y f`` where no linear system is needed.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass
from typing import Any, Callable, Optional, Union

import numpy as np

from .errors import ConfigError, DegenerateInputError, DivergenceError, IndefiniteError
from .hypergradient import approx_hypergradient, hypergradient_error
from .manifolds import add_tangent, scale_tangent
from .manifolds.base import ensure_finite
from .problem import BilevelProblem
from .solvers import (
    AdaState,
    adaptive_linear_solve_gd,
    adaptive_lower_solve,
    staged_cap_schedule,
    tscg_solve,
)
from .trace import RunTrace, TraceRow, ergodic_min_gradnorm

CapSchedule = Union[str, int, None, Callable[[int], int]]

# numerical failures that, mid-run, mean the iterates blew up
_BLOWUPS = (DivergenceError, DegenerateInputError, IndefiniteError,
            np.linalg.LinAlgError, FloatingPointError, OverflowError)


@dataclass
class AdaRHDConfig:
    T: int = 100
    a0: float = 1.0
    b0: float = 1.0
    c0: Optional[float] = None
    inner_mode: str = "gd"
    map_mode: str = "exp"
    eps_y: Optional[float] = None
    eps_v: Optional[float] = None
    inner_cap_schedule: CapSchedule = "staged"
    cg_tol: Optional[float] = None
    cg_cap: Optional[int] = None
    reset_accumulators: bool = False
    early_stop: bool = False
    early_stop_hypergrad_sq: Optional[float] = None
    track_error: bool = False
    error_every: int = 1
    divergence_threshold: float = 1e12
    seed: int = 0

    def __post_init__(self):
        if int(self.T) < 1:
            raise ConfigError("T must be at least 1")
        self.T = int(self.T)
        for name in ("a0", "b0"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.c0 is not None and not self.c0 > 0:
            raise ConfigError("c0 must be positive")
        if self.inner_mode not in ("gd", "cg"):
            raise ConfigError(f"inner_mode must be 'gd' or 'cg', got {self.inner_mode!r}")
        if self.map_mode not in ("exp", "retract"):
            raise ConfigError(f"map_mode must be 'exp' or 'retract', got {self.map_mode!r}")
        for name in ("eps_y", "eps_v", "cg_tol", "early_stop_hypergrad_sq"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigError(f"{name} must be positive")
        if self.inner_mode == "cg" and self.c0 is not None:
            warnings.warn("c0 is ignored when the linear system is solved by CG", stacklevel=3)
        if isinstance(self.inner_cap_schedule, str) and self.inner_cap_schedule != "staged":
            raise ConfigError("inner_cap_schedule must be 'staged', an int, None or a callable")

    @property
    def tol_y(self) -> float:
        return self.eps_y if self.eps_y is not None else 1.0 / self.T

    @property
    def tol_v(self) -> float:
        return self.eps_v if self.eps_v is not None else 1.0 / self.T

    @property
    def stop_threshold(self) -> Optional[float]:
        if not self.early_stop:
            return None
        if self.early_stop_hypergrad_sq is not None:
            return self.early_stop_hypergrad_sq
        return 1.0 / self.T

    def cap(self, t: int) -> Optional[int]:
        s = self.inner_cap_schedule
        if s == "staged":
            return staged_cap_schedule(t)
        if s is None or isinstance(s, int):
            return s
        return int(s(t))

    def to_dict(self) -> dict:
        d = asdict(self)
        if callable(self.inner_cap_schedule):
            d["inner_cap_schedule"] = getattr(self.inner_cap_schedule, "__name__", "callable")
        return d


def _initial_points(problem, x0, y0, seed):
    rng = np.random.default_rng(seed)
    if x0 is None:
        x0 = problem.x0 if problem.x0 is not None else problem.upper.random_point(rng)
    if y0 is None:
        y0 = problem.y0 if problem.y0 is not None else problem.lower.random_point(rng)
    return x0, y0


def _algorithm_name(config: AdaRHDConfig) -> str:
    suffix = "-R" if config.map_mode == "retract" else ""
    return f"AdaRHD{suffix}-{config.inner_mode.upper()}"


def run_adarhd(
    problem: BilevelProblem,
    config: AdaRHDConfig,
    x0=None,
    y0=None,
    v0=None,
    callback: Optional[Callable[..., Any]] = None,
) -> RunTrace:
    """Run the adaptive hypergradient method for ``config.T`` outer iterations.

    Raises :class:`DivergenceError` (with the partial trace attached) when the
    iterates become non-finite or the hypergradient norm explodes.
    """
    return _run(problem, config, x0, y0, v0, callback, minmax=False)


def run_minmax(
    problem: BilevelProblem,
    config: AdaRHDConfig,
    x0=None,
    y0=None,
    callback: Optional[Callable[..., Any]] = None,
) -> RunTrace:
    """Adaptive descent for ``min_x max_y f`` (lower objective ``g = -f``).

    The hypergradient estimate is just ``grad_x f`` at the approximate inner
    maximizer, so the trace records ``N_t = 0``.
    """
    return _run(problem, config, x0, y0, None, callback, minmax=True)


def _run(problem, config, x0, y0, v0, callback, minmax):
    upper, lower = problem.upper, problem.lower
    x, y = _initial_points(problem, x0, y0, config.seed)
    v = lower.zero_tangent(y) if v0 is None else v0
    a = AdaState(config.a0)
    b = AdaState(config.b0)
    c = AdaState(config.c0 if config.c0 is not None else 1.0)
    name = "AdaRHD-minmax" if minmax else _algorithm_name(config)
    trace = RunTrace(algorithm=name, config=config.to_dict(), a0=config.a0)
    threshold = config.stop_threshold
    track = config.track_error and problem.exact_hypergradient is not None
    elapsed = 0.0

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for t in range(config.T):
            tic = time.perf_counter()
            try:
                if config.reset_accumulators:
                    b.reset()
                    c.reset()
                cap = config.cap(t)
                low = adaptive_lower_solve(problem, x, y, b, config.tol_y, cap, config.map_mode)
                y_new = low.solution
                cap_hit = low.cap_hit
                if minmax:
                    n_t = 0
                    hg = problem.grad_f_x(x, y_new)
                elif config.inner_mode == "gd":
                    v_init = lower.transport(y, y_new, v)
                    lin = adaptive_linear_solve_gd(problem, x, y_new, v_init, c, config.tol_v, cap)
                    v, n_t, cap_hit = lin.solution, lin.iterations, cap_hit or lin.cap_hit
                    hg = approx_hypergradient(problem, x, y_new, v)
                else:
                    tol = config.cg_tol if config.cg_tol is not None else config.tol_v
                    lin = tscg_solve(problem, x, y_new, None, tol, config.cg_cap)
                    v, n_t, cap_hit = lin.solution, lin.iterations, cap_hit or lin.cap_hit
                    hg = approx_hypergradient(problem, x, y_new, v)
                y = y_new
                hsq = upper.inner(x, hg, hg)
                if not (math.isfinite(hsq) and ensure_finite(hg)) or hsq > config.divergence_threshold:
                    raise DivergenceError(f"hypergradient norm^2 = {hsq:.3e} at t={t}")
                step = a.update(hsq)
                elapsed += time.perf_counter() - tic
            except _BLOWUPS as exc:
                elapsed += time.perf_counter() - tic
                trace.append(TraceRow(t, math.inf, a.value, 0, 0, math.nan, elapsed, math.nan, "diverged"))
                trace.mark_diverged()
                trace.x, trace.y, trace.v = x, y, v
                raise DivergenceError(f"{name} diverged at t={t}: {exc}", trace) from exc

            err = math.nan
            if track and t % config.error_every == 0:
                err = hypergradient_error(problem, x, y, v) if not minmax else _minmax_error(problem, x, hg)
            row = TraceRow(
                t=t,
                hypergrad_sq=hsq,
                a=a.value,
                K_t=low.iterations,
                N_t=n_t,
                upper_obj=float(problem.f(x, y)),
                time_s=elapsed,
                hypergrad_error=err,
                status="cap" if cap_hit else "ok",
            )
            trace.append(row)
            if cap_hit:
                trace.warnings.append(f"inner cap {cap} hit at t={t}")
            if callback is not None:
                callback(t, x, y, v, row)
            if threshold is not None and hsq <= threshold:
                break
            tic = time.perf_counter()
            x = upper.step(x, scale_tangent(hg, -step), config.map_mode)
            elapsed += time.perf_counter() - tic

    trace.x, trace.y, trace.v = x, y, v
    return trace


def _minmax_error(problem, x, hg):
    diff = add_tangent(hg, problem.exact_hypergradient(x), -1.0)
    return problem.upper.norm(x, diff)


__all__ = ["AdaRHDConfig", "run_adarhd", "run_minmax", "ergodic_min_gradnorm"]
