"""Submodular re-ranking: concave-over-modular objectives, greedy, total curvature."""

from .curvature import (
    BoundCertificate,
    CurvatureReport,
    approximation_bound,
    certify,
    curvature_sweep,
    total_curvature,
)
from .greedy import GreedyTrace, OracleResult, brute_force_maximize, greedy_maximize, lazy_greedy_maximize
from .objectives import (
    CompositeObjective,
    ConcaveTransform,
    DiversityTerm,
    GroundSet,
    MmrObjective,
    ModularFunction,
    StructureVerdict,
    build_objective,
    check_structure,
)

__version__ = "0.1.0"

__all__ = [
    "BoundCertificate",
    "CompositeObjective",
    "ConcaveTransform",
    "CurvatureReport",
    "DiversityTerm",
    "GreedyTrace",
    "GroundSet",
    "MmrObjective",
    "ModularFunction",
    "OracleResult",
    "StructureVerdict",
    "approximation_bound",
    "brute_force_maximize",
    "build_objective",
    "certify",
    "check_structure",
    "curvature_sweep",
    "greedy_maximize",
    "lazy_greedy_maximize",
    "total_curvature",
]
