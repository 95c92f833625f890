"""Shallow hyper-representation for regression on SPD inputs.

Features are ``phi_i(A) = vecu(log(A^T D_i A))`` for ``A`` on ``St(d, r)``,
where ``vecu`` stacks the upper triangle (diagonal included).  The lower
problem is ridge regression of the training targets on these features; the
upper objective is the validation least-squares loss at the ridge solution.

``vecu(L) . beta = <L, C(beta)>_F`` with ``C`` symmetric, ``C_ii = beta_ii``
and ``C_ij = C_ji = beta_ij / 2``, which turns every derivative in ``A`` into
a Frechet derivative of the matrix logarithm.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DegenerateInputError
from ..manifolds import SPD, Euclidean, Stiefel
from ..problem import BilevelProblem


@dataclass(frozen=True)
class ShallowHyperRepInstance:
    n: int
    d: int
    r: int
    lam: float
    noise_sd: float
    seed: int
    D_tr: np.ndarray
    y_tr: np.ndarray
    D_val: np.ndarray
    y_val: np.ndarray
    A_true: np.ndarray
    beta_true: np.ndarray

    def to_json(self) -> dict:
        return {"kind": "shallow_hyperrep", "n": self.n, "d": self.d, "r": self.r,
                "lam": self.lam, "noise_sd": self.noise_sd, "seed": self.seed}


def log_divided_differences(w):
    """First divided differences of ``log`` on the spectrum ``w``.

    ``G_ij = (log w_i - log w_j) / (w_i - w_j)``, and ``1 / w_i`` when the
    eigenvalues coincide.
    """
    lw = np.log(w)
    dw = w[..., :, None] - w[..., None, :]
    dl = lw[..., :, None] - lw[..., None, :]
    close = np.abs(dw) <= 1e-10 * np.maximum(w[..., :, None], w[..., None, :])
    mean = 0.5 * (w[..., :, None] + w[..., None, :])
    return np.where(close, 1.0 / mean, dl / np.where(close, 1.0, dw))


class LogFeatures:
    """Spectral data of ``A^T D_i A`` for a stack ``D``; recomputed when ``A`` changes."""

    def __init__(self, D: np.ndarray):
        self.D = D
        self._key = None

    def at(self, A):
        key = A.tobytes()
        if key != self._key:
            self.DA = self.D @ A
            P = A.T @ self.DA
            w, q = np.linalg.eigh(0.5 * (P + np.swapaxes(P, 1, 2)))
            if not w.min() > 0:
                raise DegenerateInputError("A^T D A is not positive definite")
            self.q = q
            self.G = log_divided_differences(w)
            self.L = (q * np.log(w)[:, None, :]) @ np.swapaxes(q, 1, 2)
            self._key = key
        return self

    def dlog(self, E):
        """Frechet derivative of ``log`` at each ``A^T D_i A`` along ``E`` (broadcast)."""
        qt = np.swapaxes(self.q, 1, 2)
        return self.q @ (self.G * (qt @ E @ self.q)) @ qt

    def egrad(self, weights, C):
        """Euclidean gradient in ``A`` of ``sum_i weights_i <C, log(A^T D_i A)>``."""
        K = self.dlog(C)
        return 2.0 * np.einsum("n,nij,njk->ik", weights, self.DA, K)


def coef_matrix(beta, r: int):
    """Symmetric ``C`` with ``vecu(L) . beta = <L, C>`` for every symmetric ``L``."""
    U = np.zeros((r, r))
    U[np.triu_indices(r)] = beta
    return 0.5 * (U + U.T)


def make_shallow_hyperrep(n: int = 200, d: int = 50, r: int = 10, lam: float = 0.1,
                          noise_sd: float = 0.1, seed: int = 0):
    """Build the problem and its data; returns ``(problem, instance)``.

    Samples ``D_i`` are SPD with log-uniform spectra in ``[0.1, 10]``; targets
    come from a random ground-truth ``(A, beta)`` plus Gaussian noise, and the
    samples are split evenly into training and validation halves.
    """
    if not d >= r >= 1:
        raise ConfigError(f"need d >= r >= 1, got d={d}, r={r}")
    if not lam > 0:
        raise ConfigError("lam must be positive (the ridge Gram matrix would be singular)")
    if n < 2 or n % 2:
        raise ConfigError("n must be an even number >= 2")
    rng = np.random.default_rng(seed)
    spd, St = SPD(d), Stiefel(d, r)
    D = np.stack([spd.random_point(rng) for _ in range(n)])
    A_true = St.random_point(rng)
    p = r * (r + 1) // 2
    beta_true = rng.standard_normal(p)
    iu = np.triu_indices(r)
    truth = LogFeatures(D).at(A_true)
    targets = truth.L[:, iu[0], iu[1]] @ beta_true + noise_sd * rng.standard_normal(n)
    m = n // 2
    D_tr, D_val = D[:m], D[m:]
    y_tr, y_val = targets[:m], targets[m:]
    for a in (D_tr, D_val, y_tr, y_val, A_true, beta_true):
        a.setflags(write=False)
    tr, val = LogFeatures(D_tr), LogFeatures(D_val)

    def phi(feat, A):
        return feat.at(A).L[:, iu[0], iu[1]]

    def residual(feat, targets, A, beta):
        return phi(feat, A) @ beta - targets

    def f(A, beta):
        res = residual(val, y_val, A, beta)
        return 0.5 * float(res @ res) / m

    def g(A, beta):
        res = residual(tr, y_tr, A, beta)
        return 0.5 * float(res @ res) / m + 0.5 * lam * float(beta @ beta)

    def grad_f_x(A, beta):
        res = residual(val, y_val, A, beta)
        return St.proj(A, val.egrad(res / m, coef_matrix(beta, r)))

    def grad_f_y(A, beta):
        return phi(val, A).T @ residual(val, y_val, A, beta) / m

    def grad_g_y(A, beta):
        return phi(tr, A).T @ residual(tr, y_tr, A, beta) / m + lam * beta

    def hess_g_y_vec(A, beta, v):
        F = phi(tr, A)
        return F.T @ (F @ v) / m + lam * v

    def grad_g_x(A, beta):
        res = residual(tr, y_tr, A, beta)
        return St.proj(A, tr.egrad(res / m, coef_matrix(beta, r)))

    def cross_g_xy_vec(A, beta, v):
        F = phi(tr, A)
        res = F @ beta - y_tr
        eg = tr.egrad((F @ v) / m, coef_matrix(beta, r)) + tr.egrad(res / m, coef_matrix(v, r))
        return St.proj(A, eg)

    def cross_g_yx_vec(A, beta, U):
        F = phi(tr, A)
        res = F @ beta - y_tr
        E = np.swapaxes(tr.DA, 1, 2) @ U
        dF = tr.dlog(E + np.swapaxes(E, 1, 2))[:, iu[0], iu[1]]
        return (dF.T @ res + F.T @ (dF @ beta)) / m

    def gram(A):
        F = phi(tr, A)
        return F, F.T @ F / m + lam * np.eye(p)

    def lower_closed_form(A):
        F, H = gram(A)
        return np.linalg.solve(H, F.T @ y_tr / m)

    def exact_hypergradient(A):
        F, H = gram(A)
        beta = np.linalg.solve(H, F.T @ y_tr / m)
        v = np.linalg.solve(H, grad_f_y(A, beta))
        return grad_f_x(A, beta) - cross_g_xy_vec(A, beta, v)

    inst = ShallowHyperRepInstance(n, d, r, float(lam), float(noise_sd), seed,
                                   D_tr, y_tr, D_val, y_val, A_true, beta_true)
    problem = BilevelProblem(
        upper=St,
        lower=Euclidean(p),
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
        y0=np.zeros(p),
        name="shallow_hyperrep",
        meta={"instance": inst},
    )
    return problem, inst
