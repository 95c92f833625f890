import numpy as np

from .base import Manifold


class Euclidean(Manifold):
    """Flat space of arrays with a fixed shape."""

    name = "euclidean"
    isometric_transport = True
    hadamard = True
    curvature_lower_bound = 0.0

    def __init__(self, *shape: int):
        if not shape:
            raise ValueError("Euclidean needs at least one dimension")
        self.shape = tuple(int(s) for s in shape)

    def _inner(self, x, u, v):
        return float(np.vdot(u, v))

    def _exp(self, x, u):
        return x + u

    def _log(self, x, y):
        return y - x

    def _transport(self, x_from, x_to, u):
        return u

    def _dist(self, x, y):
        return float(np.linalg.norm(np.ravel(y - x)))

    def _egrad_to_rgrad(self, x, eg):
        return eg

    def _proj(self, x, z):
        return z

    def ehess_to_rhess(self, x, eg, eh, u):
        return eh

    def random_point(self, rng):
        return rng.standard_normal(self.shape)

    def tangent_basis(self, x):
        n = int(np.prod(self.shape))
        return [e.reshape(self.shape) for e in np.eye(n)]

    def dim(self):
        return int(np.prod(self.shape))

    def __repr__(self):
        return f"Euclidean{self.shape}"
