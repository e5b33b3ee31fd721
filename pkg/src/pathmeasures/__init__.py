"""Conditioning, relative entropy and entropic bridges for path measures on finite grids."""
from ._kernels import BACKEND
from .conditioning import (Conditional, Kernel, cond_density_formula, cond_expect,
                           cond_expect_nonneg, density_factorize, disintegrate, expect_nonneg,
                           marginal_density)
from .entropy import (convexity_probe, dual_maximize, dual_value, entropy_decompose,
                      joint_convexity_probe, rel_entropy, rel_entropy_W, w_function)
from .errors import DomainError
from .extreal import ExtNonNeg
from .measure import (BlockMeasure, DivergentAtomReport, FiniteMeasure, FiniteSpace, Map,
                      SigmaFinite, SigmaFinitePartition, density, gamma, lebesgue_decompose,
                      pushforward, sigma_finite_probe)
from .pathspace import (MarkovSpec, PathMeasure, TimeGrid, check_markov, is_conditionable,
                        markov_factorization, markov_factorization_interval, paths_of)
from .schrodinger import (FGTransform, SchrodingerSolution, basis_move, fg_marginals, fg_transform,
                          sinkhorn, solve_bridge, static_reduce)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BlockMeasure", "Conditional", "DivergentAtomReport", "DomainError", "ExtNonNeg",
    "FGTransform", "FiniteMeasure", "FiniteSpace", "Kernel", "Map", "MarkovSpec", "PathMeasure",
    "SchrodingerSolution", "SigmaFinite", "basis_move", "SigmaFinitePartition", "TimeGrid", "check_markov",
    "cond_density_formula", "cond_expect", "cond_expect_nonneg", "convexity_probe", "density",
    "density_factorize", "disintegrate", "dual_maximize", "dual_value", "entropy_decompose",
    "expect_nonneg", "fg_marginals", "fg_transform", "gamma", "is_conditionable",
    "joint_convexity_probe", "lebesgue_decompose", "marginal_density", "markov_factorization",
    "markov_factorization_interval", "paths_of", "pushforward", "rel_entropy", "rel_entropy_W",
    "sigma_finite_probe", "sinkhorn", "solve_bridge", "static_reduce", "w_function",
]
