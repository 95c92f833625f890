import numpy as np

from ..errors import ContractError
from .base import Manifold


class Product(Manifold):
    """Cartesian product; points and tangents are tuples of component arrays."""

    name = "product"

    def __init__(self, *factors: Manifold):
        if not factors:
            raise ValueError("Product needs at least one factor")
        self.factors = tuple(factors)
        self.isometric_transport = all(m.isometric_transport for m in factors)

    def _zip(self, *items):
        for item in items:
            if not isinstance(item, tuple) or len(item) != len(self.factors):
                raise ContractError(f"expected a {len(self.factors)}-tuple")
        return zip(self.factors, *items)

    def _inner(self, x, u, v):
        return float(sum(m._inner(xi, ui, vi) for m, xi, ui, vi in self._zip(x, u, v)))

    def _exp(self, x, u):
        return tuple(m._exp(xi, ui) for m, xi, ui in self._zip(x, u))

    def _retract(self, x, u):
        return tuple(m._retract(xi, ui) for m, xi, ui in self._zip(x, u))

    def _log(self, x, y):
        return tuple(m._log(xi, yi) for m, xi, yi in self._zip(x, y))

    def _dist(self, x, y):
        return float(np.sqrt(sum(m._dist(xi, yi) ** 2 for m, xi, yi in self._zip(x, y))))

    def _transport(self, x_from, x_to, u):
        return tuple(m._transport(a, b, ui) for m, a, b, ui in self._zip(x_from, x_to, u))

    def _egrad_to_rgrad(self, x, eg):
        return tuple(m._egrad_to_rgrad(xi, gi) for m, xi, gi in self._zip(x, eg))

    def _proj(self, x, z):
        return tuple(m._proj(xi, zi) for m, xi, zi in self._zip(x, z))

    def zero_tangent(self, x):
        return tuple(m.zero_tangent(xi) for m, xi in self._zip(x))

    def random_point(self, rng):
        return tuple(m.random_point(rng) for m in self.factors)

    def random_tangent(self, rng, x, scale=1.0):
        u = tuple(m._proj(xi, rng.standard_normal(np.shape(xi))) for m, xi in self._zip(x))
        return scale_tangent(u, scale / np.sqrt(self._inner(x, u, u)))

    def max_step(self, x):
        return min(m.max_step(xi) for m, xi in self._zip(x))

    def check_point(self, x):
        for m, xi in self._zip(x):
            m.check_point(xi)

    def check_tangent(self, x, u):
        for m, xi, ui in self._zip(x, u):
            m.check_tangent(xi, ui)

    def tangent_basis(self, x):
        zeros = [m.zero_tangent(xi) for m, xi in self._zip(x)]
        out = []
        for k, (m, xi) in enumerate(self._zip(x)):
            for b in m.tangent_basis(xi):
                comp = list(zeros)
                comp[k] = b
                out.append(tuple(comp))
        return out

    def dim(self):
        return sum(m.dim() for m in self.factors)

    def point_to_json(self, x):
        return {
            "manifold": "product",
            "components": [
                {"manifold": m.name, "shape": list(np.shape(xi)), "data": np.ravel(xi).tolist()}
                for m, xi in self._zip(x)
            ],
        }

    def __repr__(self):
        return "Product(" + ", ".join(map(repr, self.factors)) + ")"


# tangent arithmetic that works for arrays and tuples of arrays

def add_tangent(u, v, alpha=1.0):
    """Return ``u + alpha * v``."""
    if isinstance(u, tuple):
        return tuple(add_tangent(a, b, alpha) for a, b in zip(u, v))
    return u + alpha * v


def scale_tangent(u, alpha):
    if isinstance(u, tuple):
        return tuple(scale_tangent(a, alpha) for a in u)
    return alpha * u


def flatten(u):
    if isinstance(u, tuple):
        return np.concatenate([np.ravel(a) for a in u])
    return np.ravel(u)
