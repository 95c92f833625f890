"""Maximum-similarity problem between two data matrices.

Upper variable ``W`` on ``St(d, r)``, lower variable ``M`` on ``S_++^d``::

    max_W  tr(M*(W) X^T Y W^T)
    M*(W) = argmin_M  <M, X^T X> + <M^-1, W Y^T Y W^T + lam I>

The upper maximization is negated, so ``f = -tr(M X^T Y W^T)``.  With
``A = X^T X`` and ``B = W S W^T + lam I`` (``S = Y^T Y``) the lower solution is
the matrix geometric mean ``M* = A^-1/2 (A^1/2 B A^1/2)^1/2 A^-1/2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_sylvester

from ..errors import ConfigError
from ..manifolds import SPD, Stiefel, sym, sym_funm
from ..problem import BilevelProblem


@dataclass(frozen=True)
class SimpleSimilarityInstance:
    n: int
    d: int
    r: int
    lam: float
    seed: int
    X: np.ndarray
    Y: np.ndarray

    def to_json(self) -> dict:
        return {"kind": "simple_similarity", "n": self.n, "d": self.d, "r": self.r,
                "lam": self.lam, "seed": self.seed}


def make_simple_similarity(n: int = 100, d: int = 50, r: int = 20, lam: float = 0.01, seed: int = 0):
    """Build the problem and its data; returns ``(problem, instance)``."""
    if not (n >= d >= r >= 1):
        raise ConfigError(f"need n >= d >= r >= 1, got n={n}, d={d}, r={r}")
    if not lam > 0:
        raise ConfigError("lam must be positive")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    Y = rng.standard_normal((n, r))
    for a in (X, Y):
        a.setflags(write=False)
    A = X.T @ X
    S = Y.T @ Y
    XtY = X.T @ Y
    eye = np.eye(d)
    St, P = Stiefel(d, r), SPD(d)
    A_half = sym_funm(A, np.sqrt)
    A_ihalf = sym_funm(A, lambda w: 1.0 / np.sqrt(w))

    def B(W):
        return sym(W @ S @ W.T) + lam * eye

    def f(W, M):
        return -float(np.sum(M * (W @ XtY.T)))

    def g(W, M):
        return float(np.sum(M * A) + np.sum(P.inverse(M) * B(W)))

    def grad_f_x(W, M):
        return St.proj(W, -M @ XtY)

    def grad_f_y(W, M):
        return sym(M @ sym(-XtY @ W.T) @ M)

    def grad_g_y(W, M):
        return sym(M @ A @ M) - B(W)

    def hess_g_y_vec(W, M, U):
        MiB = P.inverse(M) @ B(W)
        return sym(U @ A @ M) + sym(U @ MiB)

    def grad_g_x(W, M):
        return St.proj(W, 2.0 * P.inverse(M) @ (W @ S))

    def cross_g_xy_vec(W, M, V):
        Mi = P.inverse(M)
        return St.proj(W, -2.0 * Mi @ V @ Mi @ W @ S)

    def cross_g_yx_vec(W, M, U):
        return -2.0 * sym(U @ S @ W.T)

    def lower_closed_form(W):
        return sym(A_ihalf @ sym_funm(A_half @ B(W) @ A_half, np.sqrt) @ A_ihalf)

    def exact_hypergradient(W):
        # at M*, B = M A M so the Hessian reduces to U A M + M A U
        M = lower_closed_form(W)
        v = sym(solve_sylvester(M @ A, A @ M, grad_f_y(W, M)))
        return grad_f_x(W, M) - cross_g_xy_vec(W, M, v)

    inst = SimpleSimilarityInstance(n, d, r, float(lam), seed, X, Y)
    problem = BilevelProblem(
        upper=St,
        lower=P,
        f=f,
        g=g,
        grad_f_x=grad_f_x,
        grad_f_y=grad_f_y,
        grad_g_y=grad_g_y,
        hess_g_y_vec=hess_g_y_vec,
        cross_g_xy_vec=cross_g_xy_vec,
        grad_g_x=grad_g_x,
        cross_g_yx_vec=cross_g_yx_vec,
        lower_closed_form=lower_closed_form,
        exact_hypergradient=exact_hypergradient,
        x0=St.random_point(rng),
        y0=eye.copy(),
        name="simple_similarity",
        meta={"instance": inst},
    )
    return problem, inst
