"""Riemannian geometries: Euclidean, SPD, Stiefel, sphere, simplex and products."""
from .base import Manifold, ManifoldPoint, TangentVector
from .euclidean import Euclidean
from .product import Product, add_tangent, flatten, scale_tangent
from .simplex import Simplex
from .spd import SPD, eigh_sym, sym, sym_funm
from .sphere import Sphere
from .stiefel import Stiefel

__all__ = [
    "Manifold",
    "ManifoldPoint",
    "TangentVector",
    "Euclidean",
    "SPD",
    "Stiefel",
    "Sphere",
    "Simplex",
    "Product",
    "add_tangent",
    "scale_tangent",
    "flatten",
    "sym",
    "eigh_sym",
    "sym_funm",
    "manifold_from_json",
]


def manifold_from_json(obj: dict) -> Manifold:
    """Rebuild a geometry from ``{"manifold": name, "shape": [...]}``."""
    name, shape = obj["manifold"], obj["shape"]
    if name == "euclidean":
        return Euclidean(*shape)
    if name == "spd":
        return SPD(shape[0])
    if name == "stiefel":
        return Stiefel(*shape)
    if name == "sphere":
        return Sphere(shape[0])
    if name == "simplex":
        return Simplex(shape[0])
    raise ValueError(f"unknown manifold {name!r}")
