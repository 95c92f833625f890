"""Distributionally robust estimation on SPD matrices.

The upper variable is a weight vector ``p`` on the probability simplex and the
lower variable an SPD matrix ``y``::

    min_p  |p - 1/n|^2 - sum_i p_i l_i(y*(p))
    y*(p) = argmin_y  sum_i p_i l_i(y)

Two losses are provided: the squared geodesic distance to SPD samples
(weighted Karcher mean) and the Gaussian negative log-likelihood of vector
samples (weighted covariance MLE).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DegenerateInputError
from ..hypergradient import dense_solve
from ..manifolds import SPD, Simplex, sym
from ..manifolds.spd import _sqrt_pair
from ..problem import BilevelProblem

KINDS = ("karcher_mean", "gaussian_mle")


@dataclass(frozen=True)
class RobustInstance:
    loss_kind: str
    n: int
    d: int
    seed: int
    samples: np.ndarray

    def to_json(self) -> dict:
        return {"kind": "robust", "loss_kind": self.loss_kind, "n": self.n, "d": self.d, "seed": self.seed}


def _t_coth_t(t):
    """``t * coth(t)`` with the removable singularity at 0 filled in."""
    t = np.abs(t)
    small = t < 1e-8
    safe = np.where(small, 1.0, t)
    return np.where(small, 1.0, safe / np.tanh(safe))


class _Whitened:
    """Per-sample spectra of ``y^-1/2 xi_i y^-1/2`` for one ``y``."""

    def __init__(self, xi):
        self.xi = xi
        self._key = None

    def at(self, y):
        key = y.tobytes()
        if key != self._key:
            self.s, self.si = _sqrt_pair(y)
            Z = self.si @ self.xi @ self.si
            w, q = np.linalg.eigh(0.5 * (Z + np.swapaxes(Z, 1, 2)))
            if not w.min() > 0:
                raise DegenerateInputError("sample is not positive definite")
            self.lam = np.log(w)
            self.q = q
            # whitened logs log(y^-1/2 xi_i y^-1/2)
            self.L = (q * self.lam[:, None, :]) @ np.swapaxes(q, 1, 2)
            self.phi = _t_coth_t(0.5 * (self.lam[:, :, None] - self.lam[:, None, :]))
            self._key = key
        return self

    def logs(self):
        """``log_y xi_i`` for every sample."""
        return self.s @ self.L @ self.s


def _karcher_losses(W, y):
    return np.sum(W.at(y).lam ** 2, axis=1)


def _make_karcher(n, d, rng):
    spd = SPD(d)
    return np.stack([spd.random_point(rng) for _ in range(n)])


def _make_gaussian(n, d, rng):
    spd = SPD(d)
    for attempt in range(10):
        cov = spd.random_point(rng)
        xi = rng.multivariate_normal(np.zeros(d), cov, size=n)
        second = xi.T @ xi / n
        w = np.linalg.eigvalsh(second)
        if w.min() > 1e-8 * w.max():
            return xi
        warnings.warn(f"degenerate Gaussian samples (attempt {attempt}); regenerating", stacklevel=3)
    raise DegenerateInputError("could not draw a non-degenerate Gaussian sample set")


def karcher_fixed_point(samples, p, y0=None, tol: float = 1e-10, max_iter: int = 1000, eta: float = 0.5):
    """Weighted Karcher mean by ``y <- Exp_y(-eta * grad)`` with exact maps.

    ``grad = -2 sum_i p_i log_y xi_i`` is the Riemannian gradient of the
    weighted sum of squared distances; the loop stops once its norm is at most
    ``tol``.
    """
    spd = SPD(samples.shape[1])
    W = _Whitened(samples)
    y = sym(np.einsum("i,ijk->jk", p, samples)) if y0 is None else y0
    for _ in range(max_iter):
        grad = -2.0 * np.einsum("i,ijk->jk", p, W.at(y).logs())
        if spd.norm(y, grad) <= tol:
            return y
        y = spd.exp(y, -eta * grad)
    raise DegenerateInputError(f"Karcher fixed point did not reach {tol} in {max_iter} iterations")


def make_robust(loss_kind: str = "karcher_mean", n: int = 10, d: int = 20, seed: int = 0):
    """Build the problem and its samples; returns ``(problem, instance)``.

    Karcher samples are SPD with log-uniform spectra in ``[0.1, 10]``; Gaussian
    samples are zero-mean with a random SPD covariance.
    """
    if loss_kind not in KINDS:
        raise ConfigError(f"loss_kind must be one of {KINDS}, got {loss_kind!r}")
    if n < 1 or d < 1:
        raise ConfigError("n and d must be positive")
    if loss_kind == "gaussian_mle" and n < d:
        raise ConfigError(f"gaussian_mle needs n >= d for an SPD weighted covariance (n={n}, d={d})")
    rng = np.random.default_rng(seed)
    samples = _make_karcher(n, d, rng) if loss_kind == "karcher_mean" else _make_gaussian(n, d, rng)
    samples.setflags(write=False)
    simplex, spd = Simplex(n), SPD(d)
    centre = np.full(n, 1.0 / n)

    if loss_kind == "karcher_mean":
        W = _Whitened(samples)

        def losses(y):
            return _karcher_losses(W, y)

        def grad_g_y(p, y):
            return -2.0 * np.einsum("i,ijk->jk", p, W.at(y).logs())

        def hess_g_y_vec(p, y, U):
            w = W.at(y)
            qt = np.swapaxes(w.q, 1, 2)
            Ut = qt @ (w.si @ U @ w.si) @ w.q
            inner = np.einsum("i,ijk->jk", 2.0 * p, w.q @ (w.phi * Ut) @ qt)
            return sym(w.s @ inner @ w.s)

        def loss_derivs(y, V):
            # D l_i(y)[V] = <grad l_i, V>_y with grad l_i = -2 log_y xi_i
            w = W.at(y)
            Vt = w.si @ V @ w.si
            return -2.0 * np.einsum("ijk,kj->i", w.L, Vt)

        def cross_g_yx_vec(p, y, u):
            return -2.0 * np.einsum("i,ijk->jk", u, W.at(y).logs())

        def lower_closed_form(p):
            return karcher_fixed_point(samples, p)

        def exact_hypergradient(p):
            y = lower_closed_form(p)
            v = dense_solve(spd, y, lambda b: hess_g_y_vec(p, y, b), grad_f_y(p, y))
            return grad_f_x(p, y) - cross_g_xy_vec(p, y, v)

    else:
        outer = np.einsum("ij,ik->ijk", samples, samples)

        def losses(y):
            _, logdet = np.linalg.slogdet(y)
            quad = np.sum(samples * np.linalg.solve(y, samples.T).T, axis=1)
            return 0.5 * logdet + 0.5 * quad

        def second_moment(p):
            return sym(np.einsum("i,ijk->jk", p, outer))

        def grad_g_y(p, y):
            return 0.5 * (np.sum(p) * y - second_moment(p))

        def hess_g_y_vec(p, y, U):
            return 0.5 * sym(U @ (spd.inverse(y) @ second_moment(p)))

        def loss_derivs(y, V):
            yi = spd.inverse(y)
            a = samples @ yi
            return 0.5 * np.trace(yi @ V) - 0.5 * np.einsum("ij,jk,ik->i", a, V, a)

        def cross_g_yx_vec(p, y, u):
            return 0.5 * (np.sum(u) * y - second_moment(u))

        def lower_closed_form(p):
            return second_moment(p)

        def exact_hypergradient(p):
            # at y* the Hessian is U / 2
            y = lower_closed_form(p)
            v = 2.0 * grad_f_y(p, y)
            return grad_f_x(p, y) - cross_g_xy_vec(p, y, v)

    def f(p, y):
        diff = p - centre
        return float(diff @ diff - p @ losses(y))

    def g(p, y):
        return float(p @ losses(y))

    def grad_f_x(p, y):
        return simplex.egrad_to_rgrad(p, 2.0 * (p - centre) - losses(y))

    def grad_f_y(p, y):
        return -grad_g_y(p, y)

    def grad_g_x(p, y):
        return simplex.egrad_to_rgrad(p, losses(y))

    def cross_g_xy_vec(p, y, V):
        return simplex.egrad_to_rgrad(p, loss_derivs(y, V))

    inst = RobustInstance(loss_kind, n, d, seed, samples)
    problem = BilevelProblem(
        upper=simplex,
        lower=spd,
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
        x0=centre.copy(),
        y0=np.eye(d),
        name=f"robust_{loss_kind}",
        meta={"instance": inst},
    )
    return problem, inst
