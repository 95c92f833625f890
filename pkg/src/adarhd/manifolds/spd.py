"""Symmetric positive definite matrices with the affine-invariant metric."""
import numpy as np
from scipy.linalg import solve_triangular

from ..errors import ContractError, DegenerateInputError, DomainError
from .base import Manifold


def sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def eigh_sym(a):
    """Symmetrize, then eigendecompose. Raises on numerical failure."""
    try:
        w, q = np.linalg.eigh(sym(a))
    except np.linalg.LinAlgError as exc:
        raise DegenerateInputError(f"eigendecomposition failed: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(q))):
        raise DegenerateInputError("eigendecomposition produced non-finite values")
    return w, q


def sym_funm(a, fn):
    """Apply a scalar function to a symmetric matrix through its spectrum."""
    w, q = eigh_sym(a)
    return (q * fn(w)) @ q.T


def _chol_pair(x):
    """Cholesky factor ``L`` (``x = L L^T``) and its inverse.

    By affine invariance ``L`` can stand in for ``x^1/2`` in exp, log, dist
    and transport, at a fraction of the cost of an eigendecomposition.
    """
    try:
        L = np.linalg.cholesky(x)
    except np.linalg.LinAlgError as exc:
        raise DegenerateInputError("matrix is not positive definite") from exc
    Li = solve_triangular(L, np.eye(len(L)), lower=True)
    return L, Li


def _sqrt_pair(x):
    w, q = eigh_sym(x)
    if w.min() <= 0:
        raise DegenerateInputError("matrix is not positive definite")
    s = np.sqrt(w)
    return (q * s) @ q.T, (q / s) @ q.T


class SPD(Manifold):
    """The manifold S_++^d.

    Metric ``<U, V>_X = tr(X^-1 U X^-1 V)``.  This is a Hadamard manifold with
    sectional curvature in ``[-1/2, 0]``.
    """

    name = "spd"
    isometric_transport = True
    hadamard = True
    curvature_lower_bound = -0.5

    def __init__(self, d: int):
        self.d = int(d)
        # (copy of x, x^-1) for the most recent base point; inner products and
        # retractions are evaluated many times at one point inside the solvers
        self._inv_cache = None

    def inverse(self, x):
        """``x^-1``, reused while consecutive calls share the base point.

        The returned array is read-only.
        """
        cached = self._inv_cache
        if cached is not None and cached[0].shape == x.shape and np.array_equal(cached[0], x):
            return cached[1]
        try:
            xi = np.linalg.inv(x)
        except np.linalg.LinAlgError as exc:
            raise DegenerateInputError("matrix is singular") from exc
        xi.setflags(write=False)
        self._inv_cache = (np.array(x, dtype=float), xi)
        return xi

    def _inner(self, x, u, v):
        xi = self.inverse(x)
        return float(np.sum((xi @ u) * (xi @ v).T))

    def _exp(self, x, u):
        L, Li = _chol_pair(x)
        e = sym_funm(Li @ u @ Li.T, np.exp)
        return sym(L @ e @ L.T)

    def _log(self, x, y):
        L, Li = _chol_pair(x)
        w, q = eigh_sym(Li @ y @ Li.T)
        if w.min() <= 0:
            raise DomainError("log target is not positive definite")
        return sym(L @ ((q * np.log(w)) @ q.T) @ L.T)

    def _dist(self, x, y):
        _, Li = _chol_pair(x)
        w, _ = eigh_sym(Li @ y @ Li.T)
        if w.min() <= 0:
            raise DomainError("distance target is not positive definite")
        return float(np.sqrt(np.sum(np.log(w) ** 2)))

    def _retract(self, x, u):
        # second-order retraction X + U + 1/2 U X^-1 U; stays positive definite
        return sym(x + u + 0.5 * u @ (self.inverse(x) @ u))

    def _transport(self, x_from, x_to, u):
        # E = (x_to x_from^-1)^1/2, written with a Cholesky factor of x_from
        L, Li = _chol_pair(x_from)
        e = L @ sym_funm(Li @ x_to @ Li.T, np.sqrt) @ Li
        return sym(e @ u @ e.T)

    def _egrad_to_rgrad(self, x, eg):
        return sym(x @ sym(eg) @ x)

    def ehess_to_rhess(self, x, eg, eh, u):
        """Riemannian Hessian-vector product from Euclidean derivatives.

        ``eh`` is the Euclidean directional derivative of the Euclidean
        gradient along ``u``.
        """
        return sym(x @ sym(eh) @ x) + sym(u @ sym(eg) @ x)

    def _proj(self, x, z):
        return sym(z)

    def random_point(self, rng, low=0.1, high=10.0):
        q, _ = np.linalg.qr(rng.standard_normal((self.d, self.d)))
        w = np.exp(rng.uniform(np.log(low), np.log(high), self.d))
        return sym((q * w) @ q.T)

    def tangent_basis(self, x):
        out = []
        for i in range(self.d):
            for j in range(i, self.d):
                e = np.zeros((self.d, self.d))
                if i == j:
                    e[i, i] = 1.0
                else:
                    e[i, j] = e[j, i] = np.sqrt(0.5)
                out.append(e)
        return out

    def check_point(self, x):
        x = np.asarray(x)
        if x.shape != (self.d, self.d):
            raise ContractError(f"expected shape {(self.d, self.d)}, got {x.shape}")
        if np.max(np.abs(x - x.T)) > 1e-12 * max(1.0, np.max(np.abs(x))):
            raise ContractError("SPD point is not symmetric")
        if np.linalg.eigvalsh(sym(x)).min() <= 0:
            raise ContractError("SPD point is not positive definite")

    def check_tangent(self, x, u):
        u = np.asarray(u)
        if np.max(np.abs(u - u.T)) > 1e-12 * max(1.0, np.max(np.abs(u))):
            raise ContractError("SPD tangent is not symmetric")

    def dim(self):
        return self.d * (self.d + 1) // 2

    def __repr__(self):
        return f"SPD({self.d})"
