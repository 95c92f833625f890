"""Non-adaptive Riemannian hypergradient descent (RHGD) with fixed step sizes."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .adarhd import _BLOWUPS, _initial_points
from .errors import ConfigError, DivergenceError
from .hypergradient import approx_hypergradient, hypergradient_error
from .manifolds import scale_tangent
from .manifolds.base import ensure_finite
from .problem import BilevelProblem
from .solvers import tscg_solve
from .trace import RunTrace, TraceRow


@dataclass
class RHGDConfig:
    T: int = 200
    eta_x: float = 0.5
    eta_y: float = 0.5
    inner_iters: int = 50
    cg_tol: float = 1e-10
    cg_cap: Optional[int] = 50
    map_mode: str = "retract"
    track_error: bool = False
    error_every: int = 1
    divergence_threshold: float = 1e12
    seed: int = 0

    def __post_init__(self):
        if int(self.T) < 1:
            raise ConfigError("T must be at least 1")
        if not (self.eta_x > 0 and self.eta_y > 0):
            raise ConfigError("step sizes must be positive")
        if int(self.inner_iters) < 0:
            raise ConfigError("inner_iters must be non-negative")
        if not self.cg_tol > 0:
            raise ConfigError("cg_tol must be positive")
        if self.map_mode not in ("exp", "retract"):
            raise ConfigError(f"map_mode must be 'exp' or 'retract', got {self.map_mode!r}")
        self.T, self.inner_iters = int(self.T), int(self.inner_iters)


def run_rhgd(problem: BilevelProblem, config: RHGDConfig, x0=None, y0=None) -> RunTrace:
    """Fixed-step hypergradient descent with a fixed number of lower-level steps.

    Each outer iteration takes exactly ``inner_iters`` steps of size ``eta_y``
    on the lower problem, solves the linear system by CG and moves ``x`` by
    ``eta_x`` times the hypergradient estimate.  A blow-up raises
    :class:`DivergenceError` carrying the partial trace (status ``diverged``).
    """
    upper, lower = problem.upper, problem.lower
    x, y = _initial_points(problem, x0, y0, config.seed)
    v = lower.zero_tangent(y)
    trace = RunTrace(algorithm=f"RHGD-{config.inner_iters}", config=asdict(config), a0=1.0 / config.eta_x)
    track = config.track_error and problem.exact_hypergradient is not None
    elapsed = 0.0
    a_col = 1.0 / config.eta_x

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for t in range(config.T):
            tic = time.perf_counter()
            try:
                for k in range(config.inner_iters):
                    grad = problem.grad_g_y(x, y)
                    if not ensure_finite(grad):
                        raise DivergenceError(f"non-finite lower gradient at t={t}, k={k}")
                    y = lower.step(y, scale_tangent(grad, -config.eta_y), config.map_mode)
                lin = tscg_solve(problem, x, y, None, config.cg_tol, config.cg_cap)
                v = lin.solution
                hg = approx_hypergradient(problem, x, y, v)
                hsq = upper.inner(x, hg, hg)
                if not (math.isfinite(hsq) and ensure_finite(hg)) or hsq > config.divergence_threshold:
                    raise DivergenceError(f"hypergradient norm^2 = {hsq:.3e} at t={t}")
                elapsed += time.perf_counter() - tic
            except _BLOWUPS as exc:
                elapsed += time.perf_counter() - tic
                trace.append(TraceRow(t, math.inf, a_col, config.inner_iters, 0, math.nan, elapsed, math.nan, "diverged"))
                trace.mark_diverged()
                trace.x, trace.y, trace.v = x, y, v
                raise DivergenceError(f"RHGD diverged at t={t}: {exc}", trace) from exc

            err = math.nan
            if track and t % config.error_every == 0:
                err = hypergradient_error(problem, x, y, v)
            trace.append(TraceRow(
                t=t,
                hypergrad_sq=hsq,
                a=a_col,
                K_t=config.inner_iters,
                N_t=lin.iterations,
                upper_obj=float(problem.f(x, y)),
                time_s=elapsed,
                hypergrad_error=err,
                status="cap" if lin.cap_hit else "ok",
            ))
            tic = time.perf_counter()
            x = upper.step(x, scale_tangent(hg, -config.eta_x), config.map_mode)
            elapsed += time.perf_counter() - tic

    trace.x, trace.y, trace.v = x, y, v
    return trace
