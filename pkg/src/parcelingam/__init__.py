"""Causal orderings for linear non-Gaussian acyclic models with latent
confounders."""

from .core_stats import DataMatrix
from .discovery import DiscoveryResult, algorithm1, algorithm2, algorithm3, direct_lingam
from .evaluation import ScoreReport, score_ordering, score_result, score_strengths
from .ordering import CausalOrderingMatrix, OrderedLists, build_ordering_matrix, merge_orderings
from .simgen import SemGroundTruth, SemSpec, builtin_network, generate

__version__ = "0.1.0"

__all__ = [
    "CausalOrderingMatrix",
    "DataMatrix",
    "DiscoveryResult",
    "OrderedLists",
    "ScoreReport",
    "SemGroundTruth",
    "SemSpec",
    "algorithm1",
    "algorithm2",
    "algorithm3",
    "build_ordering_matrix",
    "builtin_network",
    "direct_lingam",
    "generate",
    "merge_orderings",
    "score_ordering",
    "score_result",
    "score_strengths",
]
