"""Approximate hypergradient and the tangent-space quadratic subproblem.

For fixed ``(x, y)`` the quadratic ``R(v) = 1/2 <v, H[v]> - <v, grad_y f>``
has gradient ``H[v] - grad_y f`` where ``H`` is the Riemannian Hessian of
``g`` in ``y``.  Its minimizer ``v*`` feeds the hypergradient estimate
``grad_x f - cross_xy g [v]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import UnsupportedOperation
from .manifolds import add_tangent, flatten
from .problem import BilevelProblem

MAX_DENSE_DIM = 10_000


@dataclass(frozen=True)
class QuadResidual:
    value: Any
    norm_sq: float


def quad_residual(problem: BilevelProblem, x, y, v) -> QuadResidual:
    """Gradient of the quadratic subproblem in ``v`` and its squared norm."""
    r = add_tangent(problem.hess(x, y, v), problem.grad_f_y(x, y), -1.0)
    return QuadResidual(r, problem.lower.inner(y, r, r))


def quad_value(problem: BilevelProblem, x, y, v) -> float:
    M = problem.lower
    return 0.5 * M.inner(y, v, problem.hess(x, y, v)) - M.inner(y, v, problem.grad_f_y(x, y))


def approx_hypergradient(problem: BilevelProblem, x, y, v):
    """``grad_x f(x, y) - cross_xy g(x, y)[v]`` (a tangent vector at ``x``)."""
    return add_tangent(problem.grad_f_x(x, y), problem.cross(x, y, v), -1.0)


def dense_solve(manifold, y, linop, rhs):
    """Solve ``linop(v) = rhs`` on ``T_y`` by assembling ``linop`` on a tangent basis."""
    basis = manifold.tangent_basis(y)
    if len(basis) > MAX_DENSE_DIM:
        raise UnsupportedOperation("dense solve capped at 1e4 tangent coordinates")
    cols = np.stack([flatten(linop(b)) for b in basis], axis=1)
    coef, *_ = np.linalg.lstsq(cols, flatten(rhs), rcond=None)
    out = manifold.zero_tangent(y)
    for c, b in zip(coef, basis):
        out = add_tangent(out, b, c)
    return out


def exact_hypergradient_dense(problem: BilevelProblem, x, y_star=None):
    """Exact hypergradient from a closed-form lower solution and a dense Hessian solve."""
    if y_star is None:
        if problem.lower_closed_form is None:
            raise UnsupportedOperation("problem has no lower-level oracle")
        y_star = problem.lower_closed_form(x)
    v_star = dense_solve(
        problem.lower, y_star, lambda b: problem.hess(x, y_star, b), problem.grad_f_y(x, y_star)
    )
    return approx_hypergradient(problem, x, y_star, v_star)


def hypergradient_error(problem: BilevelProblem, x, y, v) -> float:
    """Distance (in ``T_x``) between the estimate and the exact hypergradient."""
    if problem.exact_hypergradient is None:
        raise UnsupportedOperation("problem has no exact hypergradient oracle")
    diff = add_tangent(approx_hypergradient(problem, x, y, v), problem.exact_hypergradient(x), -1.0)
    return problem.upper.norm(x, diff)
