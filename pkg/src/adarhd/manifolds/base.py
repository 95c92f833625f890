"""Common manifold interface and the tagged point/tangent containers."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from ..errors import ContractError, UnsupportedOperation


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    """A point tagged with the name of the geometry that owns it."""

    coords: np.ndarray
    manifold_id: str

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(self.coords))

    def same_as(self, other: "ManifoldPoint") -> bool:
        return (
            self.manifold_id == other.manifold_id
            and self.coords.shape == other.coords.shape
            and np.array_equal(self.coords, other.coords)
        )

    def to_json(self) -> dict:
        return {
            "manifold": self.manifold_id,
            "shape": list(self.coords.shape),
            "data": self.coords.ravel().tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ManifoldPoint":
        data = np.asarray(obj["data"], dtype=float).reshape(obj["shape"])
        return cls(data, obj["manifold"])


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A tangent vector that remembers its base point."""

    coords: np.ndarray
    base: ManifoldPoint

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(self.coords))

    def to_json(self) -> dict:
        return {
            "manifold": self.base.manifold_id,
            "shape": list(self.coords.shape),
            "data": self.coords.ravel().tolist(),
            "base": self.base.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TangentVector":
        base = ManifoldPoint.from_json(obj["base"])
        data = np.asarray(obj["data"], dtype=float).reshape(obj["shape"])
        return cls(data, base)


def _raw_point(x):
    return x.coords if isinstance(x, ManifoldPoint) else x


def _raw_tangent(x, u):
    """Unwrap ``u``; if it is tagged, its base must coincide with ``x``."""
    if isinstance(u, TangentVector):
        xp = x if isinstance(x, ManifoldPoint) else None
        if xp is not None:
            ok = u.base.same_as(xp)
        else:
            x = np.asarray(x)
            ok = u.base.coords.shape == x.shape and np.array_equal(u.base.coords, x)
        if not ok:
            raise ContractError("tangent vector is not based at the given point")
        return u.coords
    return u


class Manifold:
    """Base class for the geometries used by the solvers.

    Points and tangent vectors are plain ``numpy`` arrays (tuples of arrays for
    product manifolds).  :class:`ManifoldPoint` / :class:`TangentVector`
    instances are accepted as well; when a tagged tangent is passed its base
    point is checked against ``x``.
    """

    name = "manifold"
    # geometric facts consumed by the diagnostics suite
    isometric_transport = False
    hadamard = False
    curvature_lower_bound = None

    # subclasses implement the underscore methods on raw arrays
    def _inner(self, x, u, v) -> float:
        raise NotImplementedError

    def _exp(self, x, u):
        raise NotImplementedError

    def _log(self, x, y):
        raise NotImplementedError

    def _retract(self, x, u):
        return self._exp(x, u)

    def _transport(self, x_from, x_to, u):
        raise NotImplementedError

    def _dist(self, x, y) -> float:
        u = self._log(x, y)
        return float(np.sqrt(max(self._inner(x, u, u), 0.0)))

    def _egrad_to_rgrad(self, x, eg):
        raise NotImplementedError

    def _proj(self, x, z):
        raise NotImplementedError

    # -- public API -------------------------------------------------------
    def inner(self, x, u, v) -> float:
        x0 = _raw_point(x)
        return float(self._inner(x0, _raw_tangent(x, u), _raw_tangent(x, v)))

    def norm(self, x, u) -> float:
        return float(np.sqrt(max(self.inner(x, u, u), 0.0)))

    def exp(self, x, u):
        return self._exp(_raw_point(x), _raw_tangent(x, u))

    def log(self, x, y):
        return self._log(_raw_point(x), _raw_point(y))

    def retract(self, x, u):
        return self._retract(_raw_point(x), _raw_tangent(x, u))

    def step(self, x, u, mode: str = "exp"):
        """Move from ``x`` along ``u`` with the exponential map or the retraction."""
        if mode == "exp":
            return self.exp(x, u)
        if mode == "retract":
            return self.retract(x, u)
        raise ContractError(f"unknown map mode {mode!r}")

    def transport(self, x_from, x_to, u):
        return self._transport(_raw_point(x_from), _raw_point(x_to), _raw_tangent(x_from, u))

    def dist(self, x, y) -> float:
        return float(self._dist(_raw_point(x), _raw_point(y)))

    distance = dist

    def egrad_to_rgrad(self, x, eg):
        return self._egrad_to_rgrad(_raw_point(x), eg)

    def proj(self, x, z):
        return self._proj(_raw_point(x), z)

    # -- helpers ----------------------------------------------------------
    def zero_tangent(self, x):
        return np.zeros_like(np.asarray(_raw_point(x), dtype=float))

    def random_point(self, rng: np.random.Generator):
        raise NotImplementedError

    def random_tangent(self, rng: np.random.Generator, x, scale: float = 1.0):
        """Random tangent at ``x`` with norm ``scale``."""
        x = _raw_point(x)
        u = self._proj(x, rng.standard_normal(np.shape(x)))
        n = np.sqrt(self._inner(x, u, u))
        return u * (scale / n)

    def max_step(self, x) -> float:
        """Radius of the ball in ``T_x`` on which exp/log stay a bijection."""
        return np.inf

    def check_point(self, x) -> None:
        """Raise :class:`ContractError` if ``x`` violates the point invariants."""

    def check_tangent(self, x, u) -> None:
        """Raise :class:`ContractError` if ``u`` is not tangent at ``x``."""

    def tangent_basis(self, x) -> list:
        """A spanning set of ``T_x`` (not necessarily orthonormal).

        The default projects ambient unit vectors and keeps an orthonormal
        (ambient) basis of their span.
        """
        x = _raw_point(x)
        shape = np.shape(x)
        n = int(np.prod(shape))
        if n > 10_000:
            raise UnsupportedOperation("tangent basis capped at 1e4 ambient coordinates")
        cols = np.stack([self._proj(x, e.reshape(shape)).ravel() for e in np.eye(n)], axis=1)
        u, s, _ = np.linalg.svd(cols, full_matrices=False)
        k = int(np.sum(s > 1e-10 * s[0]))
        return [u[:, i].reshape(shape) for i in range(k)]

    def tag(self, x) -> ManifoldPoint:
        return ManifoldPoint(_raw_point(x), self.name)

    def tag_tangent(self, x, u) -> TangentVector:
        return TangentVector(u, self.tag(x))

    def dim(self) -> int:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


def ensure_finite(*arrays: Any) -> bool:
    for a in arrays:
        if isinstance(a, tuple):
            if not ensure_finite(*a):
                return False
        elif not np.all(np.isfinite(a)):
            return False
    return True
