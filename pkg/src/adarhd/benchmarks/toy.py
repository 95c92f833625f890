"""Euclidean sanity problems with fully analytic solutions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..manifolds import Euclidean
from ..problem import BilevelProblem, make_minmax_problem


@dataclass(frozen=True)
class ToyQuadraticInstance:
    nx: int
    ny: int
    seed: int
    C: np.ndarray

    def to_json(self) -> dict:
        return {"kind": "toy_quadratic", "nx": self.nx, "ny": self.ny, "seed": self.seed}


def make_toy_quadratic(nx: int = 2, ny: int = 2, seed: int = 0, C=None, x0=None) -> BilevelProblem:
    """``g = 1/2 |y - C x|^2`` and ``f = 1/2 |y|^2``.

    Then ``y* = C x``, ``v* = y*`` and ``grad F = C^T C x``.  ``C`` is drawn
    i.i.d. standard normal unless given explicitly.
    """
    if nx < 1 or ny < 1:
        raise ValueError("dimensions must be at least 1")
    if C is None:
        C = np.random.default_rng(seed).standard_normal((ny, nx))
    C = np.array(C, dtype=float)
    if C.shape != (ny, nx):
        raise ValueError(f"C must have shape {(ny, nx)}, got {C.shape}")
    C.setflags(write=False)

    def f(x, y):
        return 0.5 * float(y @ y)

    def g(x, y):
        r = y - C @ x
        return 0.5 * float(r @ r)

    inst = ToyQuadraticInstance(nx, ny, seed, C)
    return BilevelProblem(
        upper=Euclidean(nx),
        lower=Euclidean(ny),
        f=f,
        g=g,
        grad_f_x=lambda x, y: np.zeros(nx),
        grad_f_y=lambda x, y: np.array(y, dtype=float),
        grad_g_y=lambda x, y: y - C @ x,
        hess_g_y_vec=lambda x, y, v: np.array(v, dtype=float),
        cross_g_xy_vec=lambda x, y, v: -(C.T @ v),
        grad_g_x=lambda x, y: -(C.T @ (y - C @ x)),
        cross_g_yx_vec=lambda x, y, u: -(C @ u),
        lower_closed_form=lambda x: C @ x,
        exact_hypergradient=lambda x: C.T @ (C @ x),
        x0=np.ones(nx) if x0 is None else np.asarray(x0, float),
        y0=np.zeros(ny),
        name="toy_quadratic",
        meta={"instance": inst, "upper_value": lambda x: 0.5 * float((C @ x) @ (C @ x))},
    )


def make_saddle(n: int = 1, x0=None, y0=None) -> BilevelProblem:
    """``min_x max_y  <x, y> - 1/2 |y|^2`` in ``R^n``.

    The inner maximizer is ``y* = x``, so ``F(x) = 1/2 |x|^2`` with
    ``grad F = x`` and saddle point ``x* = 0``.
    """
    if n < 1:
        raise ValueError("dimension must be at least 1")

    def f(x, y):
        return float(x @ y) - 0.5 * float(y @ y)

    return make_minmax_problem(
        Euclidean(n),
        Euclidean(n),
        f,
        grad_f_x=lambda x, y: np.array(y, dtype=float),
        grad_f_y=lambda x, y: x - y,
        hess_g_y_vec=lambda x, y, v: np.array(v, dtype=float),
        cross_g_xy_vec=lambda x, y, v: -np.asarray(v, dtype=float),
        grad_g_x=lambda x, y: -np.asarray(y, dtype=float),
        cross_g_yx_vec=lambda x, y, u: -np.asarray(u, dtype=float),
        lower_closed_form=lambda x: np.array(x, dtype=float),
        exact_hypergradient=lambda x: np.array(x, dtype=float),
        x0=np.ones(n) if x0 is None else np.asarray(x0, float),
        y0=np.zeros(n) if y0 is None else np.asarray(y0, float),
        name="saddle",
    )
