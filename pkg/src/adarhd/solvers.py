"""Inner solvers: adaptive lower-level descent, adaptive GD and CG on the linear system."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import DivergenceError, IndefiniteError
from .hypergradient import quad_residual
from .manifolds import add_tangent, scale_tangent
from .manifolds.base import ensure_finite
from .problem import BilevelProblem

# safety net when no cap is given; never reached on well-posed problems
UNCAPPED = 1_000_000


@dataclass
class AdaState:
    """Running sum of squared gradient norms (``b_k^2``, ``c_n^2`` or ``a_t^2``).

    The step taken after :meth:`update` is ``1 / sqrt(accumulator)``.
    """

    initial: float
    accumulator: float = field(default=None)

    def __post_init__(self):
        if not self.initial > 0:
            raise ValueError("initial step-size seed must be positive")
        if self.accumulator is None:
            self.accumulator = float(self.initial) ** 2

    def update(self, norm_sq: float) -> float:
        self.accumulator += float(norm_sq)
        return 1.0 / math.sqrt(self.accumulator)

    @property
    def value(self) -> float:
        return math.sqrt(self.accumulator)

    def reset(self) -> None:
        self.accumulator = float(self.initial) ** 2


@dataclass
class InnerResult:
    solution: Any
    iterations: int
    final_residual_sq: float
    state: Optional[AdaState] = None
    cap_hit: bool = False
    residual_history: list = field(default_factory=list)


def staged_cap_schedule(t: int) -> int:
    """Inner-iteration cap ``min(50 * (floor(t / 5) + 1), 500)`` for outer round ``t``.

    Outer rounds are counted from zero, so rounds 0-4 get 50 steps.
    """
    return min(50 * (t // 5 + 1), 500)


def _cap(cap):
    return UNCAPPED if cap is None else int(cap)


def adaptive_lower_solve(
    problem: BilevelProblem,
    x,
    y_init,
    state: AdaState,
    eps_y: float,
    cap: Optional[int] = None,
    map_mode: str = "exp",
) -> InnerResult:
    """Adaptive Riemannian gradient descent on ``g(x, .)``.

    Stops once ``|grad_y g|^2 <= eps_y``.  ``state`` is updated in place and is
    meant to be carried over between outer iterations.
    """
    M = problem.lower
    cap = _cap(cap)
    y = y_init
    history = []
    k = 0
    while True:
        grad = problem.grad_g_y(x, y)
        gsq = M.inner(y, grad, grad)
        history.append(gsq)
        if not (math.isfinite(gsq) and ensure_finite(grad)):
            raise DivergenceError(f"non-finite lower-level gradient at inner step {k}")
        if gsq <= eps_y:
            return InnerResult(y, k, gsq, state, False, history)
        if k >= cap:
            return InnerResult(y, k, gsq, state, True, history)
        step = state.update(gsq)
        y = M.step(y, scale_tangent(grad, -step), map_mode)
        k += 1


def adaptive_linear_solve_gd(
    problem: BilevelProblem,
    x,
    y,
    v_init,
    state: AdaState,
    eps_v: float,
    cap: Optional[int] = None,
) -> InnerResult:
    """Adaptive gradient descent on the quadratic subproblem inside ``T_y``."""
    cap = _cap(cap)
    v = v_init
    history = []
    n = 0
    while True:
        res = quad_residual(problem, x, y, v)
        history.append(res.norm_sq)
        if not (math.isfinite(res.norm_sq) and ensure_finite(res.value)):
            raise DivergenceError(f"non-finite linear-system residual at inner step {n}")
        if res.norm_sq <= eps_v:
            return InnerResult(v, n, res.norm_sq, state, False, history)
        if n >= cap:
            return InnerResult(v, n, res.norm_sq, state, True, history)
        step = state.update(res.norm_sq)
        v = add_tangent(v, res.value, -step)
        n += 1


def tscg_solve(
    problem: BilevelProblem,
    x,
    y,
    v0=None,
    eps_v: float = 1e-10,
    cap: Optional[int] = None,
    refresh_every: int = 50,
) -> InnerResult:
    """Conjugate gradient for ``H[v] = grad_y f`` on ``T_y``.

    The loop runs while the (unsquared) residual norm exceeds ``eps_v``.  The
    residual is updated recursively and recomputed from scratch every
    ``refresh_every`` iterations.
    """
    M = problem.lower
    cap = _cap(cap)
    b = problem.grad_f_y(x, y)
    if v0 is None:
        v = M.zero_tangent(y)
        r = b
    else:
        v = v0
        r = add_tangent(b, problem.hess(x, y, v), -1.0)
    p = r
    rr = M.inner(y, r, r)
    history = [rr]
    n = 0
    while math.sqrt(max(rr, 0.0)) > eps_v:
        if not math.isfinite(rr):
            raise DivergenceError(f"non-finite CG residual at iteration {n}")
        if n >= cap:
            return InnerResult(v, n, rr, None, True, history)
        hp = problem.hess(x, y, p)
        curv = M.inner(y, p, hp)
        if not curv > 0:
            raise IndefiniteError(f"<p, H p> = {curv:.3e} <= 0 at CG iteration {n}")
        alpha = rr / curv
        v = add_tangent(v, p, alpha)
        n += 1
        if n % refresh_every == 0:
            r = add_tangent(b, problem.hess(x, y, v), -1.0)
        else:
            r = add_tangent(r, hp, -alpha)
        rr_new = M.inner(y, r, r)
        p = add_tangent(r, p, rr_new / rr)
        rr = rr_new
        history.append(rr)
    return InnerResult(v, n, rr, None, False, history)


def true_residual_sq(problem: BilevelProblem, x, y, v) -> float:
    return quad_residual(problem, x, y, v).norm_sq

