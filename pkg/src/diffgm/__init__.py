"""Differentiable combinatorial graph matching with numpy and scipy."""

from .graph import (
    Assignment, AttributedGraph, ContractError, MatchingInstance, TrainSample,
    UndefinedMetricError, accuracy, hamming_loss, hamming_loss_grad, induced_edges,
    score_linear, score_quadratic, unvec, vec,
)
from .delaunay import DegenerateGeometryError, delaunay
from .generator import GeneratorConfig, generate_dataset, generate_pair, inner_product_instance
from .lap import lap_bruteforce, lap_max
from .solver import (
    QualityLevel, SolverResult, TreeNode, brute_force_gms, constraint_violations,
    solve_gms, solve_gms_star,
)
from .sinkhorn import SinkhornConfig, discretize, permutation_loss, sinkhorn_solve
from .layer import Lambda, backward, forward, interpolated_loss
from .learn import SimilarityModel, TrainConfig, train

__version__ = "0.1.0"
