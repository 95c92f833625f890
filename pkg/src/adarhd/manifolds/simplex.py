import numpy as np

from ..errors import ContractError
from .base import Manifold
from .sphere import Sphere

_FLOOR = 1e-12


class Simplex(Manifold):
    """Open probability simplex with the Fisher metric ``sum(u * v / p)``.

    ``p -> sqrt(p)`` maps it isometrically (up to the constant factor 4) onto
    the positive orthant of the unit sphere, so exp/log/transport are the
    sphere's maps pulled back.  Entries that fall below 1e-12 after a step are
    clamped and the point renormalized.
    """

    name = "simplex"
    isometric_transport = True

    def __init__(self, n: int):
        self.n = int(n)
        self._sphere = Sphere(self.n)

    @staticmethod
    def _clean(p):
        p = np.maximum(p, _FLOOR)
        return p / p.sum()

    def _inner(self, x, u, v):
        return float(np.sum(u * v / x))

    def _proj(self, x, z):
        return z - x * np.sum(z)

    def _egrad_to_rgrad(self, x, eg):
        return x * (eg - np.dot(x, eg))

    def _exp(self, x, u):
        z = np.sqrt(x)
        w = self._sphere._exp(z, u / (2.0 * z))
        return self._clean(w * w)

    def _log(self, x, y):
        z = np.sqrt(x)
        w = self._sphere._log(z, np.sqrt(y))
        return 2.0 * z * w

    def _dist(self, x, y):
        return 2.0 * self._sphere._dist(np.sqrt(x), np.sqrt(y))

    def _transport(self, x_from, x_to, u):
        zf, zt = np.sqrt(x_from), np.sqrt(x_to)
        w = self._sphere._transport(zf, zt, u / (2.0 * zf))
        out = 2.0 * zt * w
        return out - x_to * np.sum(out)

    def _retract(self, x, u):
        # multinomial retraction p * exp(u / p), renormalized
        e = x * np.exp(u / x)
        return self._clean(e / e.sum())

    def max_step(self, x):
        # Fisher distance from p to the nearest face of the simplex
        return float(2.0 * np.arcsin(np.sqrt(np.min(x))))

    def random_point(self, rng):
        return self._clean(rng.dirichlet(np.ones(self.n)))

    def check_point(self, x):
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ContractError(f"expected shape {(self.n,)}, got {x.shape}")
        if np.any(x <= 0) or abs(x.sum() - 1.0) > 1e-12:
            raise ContractError("simplex point must be positive and sum to one")

    def check_tangent(self, x, u):
        if abs(np.sum(u)) > 1e-12 * max(1.0, np.max(np.abs(u))):
            raise ContractError("simplex tangent must sum to zero")

    def dim(self):
        return self.n - 1

    def __repr__(self):
        return f"Simplex({self.n})"
