"""Adaptive Riemannian hypergradient descent for bilevel problems on manifolds."""
__version__ = "0.1.0"
