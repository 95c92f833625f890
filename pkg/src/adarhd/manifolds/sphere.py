import numpy as np

from ..errors import ContractError, DomainError
from .base import Manifold


class Sphere(Manifold):
    """Unit sphere in R^n with the round metric."""

    name = "sphere"
    isometric_transport = True

    def __init__(self, n: int):
        self.n = int(n)

    def _inner(self, x, u, v):
        return float(np.dot(u, v))

    def _proj(self, x, z):
        return z - np.dot(x, z) * x

    _egrad_to_rgrad = _proj

    def ehess_to_rhess(self, x, eg, eh, u):
        return self._proj(x, eh) - np.dot(x, eg) * u

    def _exp(self, x, u):
        theta = np.linalg.norm(u)
        if theta < 1e-16:
            y = x + u
        else:
            y = np.cos(theta) * x + np.sin(theta) * (u / theta)
        return y / np.linalg.norm(y)

    def _retract(self, x, u):
        y = x + u
        return y / np.linalg.norm(y)

    def _log(self, x, y):
        w = self._proj(x, y)
        nw = np.linalg.norm(w)
        theta = np.arctan2(nw, np.dot(x, y))
        if theta > np.pi - 1e-8:
            raise DomainError("sphere logarithm undefined for antipodal points")
        if nw < 1e-300:
            return np.zeros_like(x)
        return theta * w / nw

    def _dist(self, x, y):
        return float(np.arctan2(np.linalg.norm(self._proj(x, y)), np.dot(x, y)))

    def _transport(self, x_from, x_to, u):
        w = self._log(x_from, x_to)
        theta = np.linalg.norm(w)
        if theta < 1e-300:
            return self._proj(x_to, u)
        e = w / theta
        out = u + np.dot(e, u) * ((np.cos(theta) - 1.0) * e - np.sin(theta) * x_from)
        return self._proj(x_to, out)

    def max_step(self, x):
        return np.pi

    def random_point(self, rng):
        x = rng.standard_normal(self.n)
        return x / np.linalg.norm(x)

    def check_point(self, x):
        if abs(np.linalg.norm(x) - 1.0) > 1e-12:
            raise ContractError("sphere point does not have unit norm")

    def check_tangent(self, x, u):
        if abs(np.dot(x, u)) > 1e-10 * max(1.0, np.linalg.norm(u)):
            raise ContractError("sphere tangent is not orthogonal to the base point")

    def dim(self):
        return self.n - 1

    def __repr__(self):
        return f"Sphere({self.n})"
