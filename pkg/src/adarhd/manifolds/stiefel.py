import numpy as np
from scipy.linalg import expm

from ..errors import ContractError, DegenerateInputError, DomainError
from .base import Manifold
from .spd import sym


class Stiefel(Manifold):
    """Orthonormal frames St(n, p) with the embedded metric tr(U^T V).

    The retraction is QR based and vector transport is projection onto the
    target tangent space, which is not an isometry.
    """

    name = "stiefel"

    def __init__(self, n: int, p: int):
        if p > n:
            raise ValueError("Stiefel(n, p) requires p <= n")
        self.n, self.p = int(n), int(p)

    def _inner(self, x, u, v):
        return float(np.sum(u * v))

    def _proj(self, x, z):
        return z - x @ sym(x.T @ z)

    def _egrad_to_rgrad(self, x, eg):
        return self._proj(x, eg)

    def ehess_to_rhess(self, x, eg, eh, u):
        return self._proj(x, eh - u @ sym(x.T @ eg))

    def _retract(self, x, u):
        q, r = np.linalg.qr(x + u)
        d = np.diag(r)
        if np.min(np.abs(d)) < 1e-12 * max(1.0, np.max(np.abs(d))):
            raise DegenerateInputError("rank-deficient QR factor in Stiefel retraction")
        return q * np.sign(d)

    def _exp(self, x, u):
        # geodesic of the embedded metric (Edelman, Arias & Smith)
        p = self.p
        a = x.T @ u
        k = u.T @ u
        block = np.block([[a, -k], [np.eye(p), a]])
        e = expm(block)[:, :p]
        return np.hstack([x, u]) @ e @ expm(-a)

    def _log(self, x, y, tol=1e-13, max_iter=200):
        # shooting: correct the velocity by the projected endpoint mismatch
        u = self._proj(x, y - x)
        for _ in range(max_iter):
            res = self._proj(x, y - self._exp(x, u))
            u = u + res
            if np.linalg.norm(res) <= tol * max(1.0, np.linalg.norm(u)):
                return u
        raise DomainError("Stiefel logarithm did not converge; points too far apart")

    def _transport(self, x_from, x_to, u):
        return self._proj(x_to, u)

    def random_point(self, rng):
        q, r = np.linalg.qr(rng.standard_normal((self.n, self.p)))
        return q * np.sign(np.diag(r))

    def check_point(self, x):
        x = np.asarray(x)
        if x.shape != (self.n, self.p):
            raise ContractError(f"expected shape {(self.n, self.p)}, got {x.shape}")
        if np.linalg.norm(x.T @ x - np.eye(self.p)) > 1e-10:
            raise ContractError("Stiefel point is not orthonormal")

    def check_tangent(self, x, u):
        s = x.T @ u
        if np.linalg.norm(s + s.T) > 1e-10 * max(1.0, np.linalg.norm(u)):
            raise ContractError("Stiefel tangent violates W^T U + U^T W = 0")

    def dim(self):
        return self.n * self.p - self.p * (self.p + 1) // 2

    def __repr__(self):
        return f"Stiefel({self.n}, {self.p})"
