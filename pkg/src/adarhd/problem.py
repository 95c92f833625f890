"""Oracle bundle describing a Riemannian bilevel problem.

Cross-derivative convention
---------------------------
``cross_g_xy_vec(x, y, v)`` maps ``v`` in ``T_y`` to ``T_x`` and equals the
derivative of ``grad_g_x(x, .)`` at ``y`` along ``v``.  Its adjoint,
``cross_g_yx_vec(x, y, u)``, is the derivative of ``grad_g_y(., y)`` at ``x``
along ``u``.  For Euclidean ``g = 1/2 |y - C x|^2`` this gives
``cross_g_xy_vec = -C^T v``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .errors import ToleranceError, UnsupportedOperation
from .manifolds import Manifold, scale_tangent

DEFAULT_FD_STEP = 1e-5


@dataclass(frozen=True)
class BilevelProblem:
    """Upper objective ``f``, lower objective ``g`` and their derivative oracles.

    All gradient oracles return Riemannian gradients.  ``hess_g_y_vec`` and
    ``cross_g_xy_vec`` may be left out; :meth:`hess` and :meth:`cross` then
    fall back to finite differences.
    """

    upper: Manifold
    lower: Manifold
    f: Callable
    g: Callable
    grad_f_x: Callable
    grad_f_y: Callable
    grad_g_y: Callable
    hess_g_y_vec: Optional[Callable] = None
    cross_g_xy_vec: Optional[Callable] = None
    grad_g_x: Optional[Callable] = None
    cross_g_yx_vec: Optional[Callable] = None
    lower_closed_form: Optional[Callable] = None
    exact_hypergradient: Optional[Callable] = None
    x0: Any = None
    y0: Any = None
    name: str = "problem"
    meta: dict = field(default_factory=dict)

    def hess(self, x, y, v):
        if self.hess_g_y_vec is not None:
            return self.hess_g_y_vec(x, y, v)
        return fd_hess_g_y_vec(self, x, y, v)

    def cross(self, x, y, v):
        if self.cross_g_xy_vec is not None:
            return self.cross_g_xy_vec(x, y, v)
        return fd_cross_g_xy_vec(self, x, y, v)

    def cross_yx(self, x, y, u):
        if self.cross_g_yx_vec is not None:
            return self.cross_g_yx_vec(x, y, u)
        return fd_cross_g_yx_vec(self, x, y, u)


def _check_step(h):
    if not h > 1e-10:
        raise ToleranceError(f"finite-difference step {h} is below 1e-10")


def fd_hess_g_y_vec(problem: BilevelProblem, x, y, v, h: float = DEFAULT_FD_STEP):
    """Central difference of ``grad_g_y`` along the geodesic through ``y``.

    Gradients at the displaced points are parallel-transported back to ``y``.
    The difference is taken along ``v / |v|`` and rescaled, so the step is
    relative to the size of ``v``.
    """
    _check_step(h)
    M = problem.lower
    nv = M.norm(y, v)
    if nv == 0.0:
        return M.zero_tangent(y)
    u = scale_tangent(v, 1.0 / nv)
    yp = M.exp(y, scale_tangent(u, h))
    ym = M.exp(y, scale_tangent(u, -h))
    gp = M.transport(yp, y, problem.grad_g_y(x, yp))
    gm = M.transport(ym, y, problem.grad_g_y(x, ym))
    return _central(gp, gm, nv / (2 * h))


def fd_cross_g_xy_vec(problem: BilevelProblem, x, y, v, h: float = DEFAULT_FD_STEP):
    """Derivative of ``grad_g_x(x, .)`` along the geodesic from ``y`` in direction ``v``.

    ``x`` stays fixed, so no transport is needed on the upper manifold.
    """
    _check_step(h)
    if problem.grad_g_x is None:
        raise UnsupportedOperation("cross derivative fallback needs grad_g_x")
    M = problem.lower
    nv = M.norm(y, v)
    if nv == 0.0:
        return problem.upper.zero_tangent(x)
    u = scale_tangent(v, 1.0 / nv)
    gp = problem.grad_g_x(x, M.exp(y, scale_tangent(u, h)))
    gm = problem.grad_g_x(x, M.exp(y, scale_tangent(u, -h)))
    return _central(gp, gm, nv / (2 * h))


def fd_cross_g_yx_vec(problem: BilevelProblem, x, y, u, h: float = DEFAULT_FD_STEP):
    """Derivative of ``grad_g_y(., y)`` along the geodesic from ``x`` in direction ``u``."""
    _check_step(h)
    N = problem.upper
    nu = N.norm(x, u)
    if nu == 0.0:
        return problem.lower.zero_tangent(y)
    w = scale_tangent(u, 1.0 / nu)
    gp = problem.grad_g_y(N.exp(x, scale_tangent(w, h)), y)
    gm = problem.grad_g_y(N.exp(x, scale_tangent(w, -h)), y)
    return _central(gp, gm, nu / (2 * h))


def _central(gp, gm, factor):
    if isinstance(gp, tuple):
        return tuple(_central(a, b, factor) for a, b in zip(gp, gm))
    return (gp - gm) * factor


def make_minmax_problem(upper, lower, f, grad_f_x, grad_f_y, **kwargs) -> BilevelProblem:
    """Wrap ``min_x max_y f`` as a bilevel problem with ``g = -f``."""

    def g(x, y):
        return -f(x, y)

    def grad_g_y(x, y):
        return scale_tangent(grad_f_y(x, y), -1.0)

    return BilevelProblem(
        upper=upper, lower=lower, f=f, g=g,
        grad_f_x=grad_f_x, grad_f_y=grad_f_y, grad_g_y=grad_g_y,
        **kwargs,
    )
