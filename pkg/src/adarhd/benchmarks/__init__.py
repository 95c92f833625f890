"""Desk-scale benchmark problems with closed-form or reference oracles."""
from .hyperrep import ShallowHyperRepInstance, make_shallow_hyperrep
from .robust import RobustInstance, karcher_fixed_point, make_robust
from .similarity import SimpleSimilarityInstance, make_simple_similarity
from .toy import ToyQuadraticInstance, make_saddle, make_toy_quadratic
