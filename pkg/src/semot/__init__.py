"""Distributional representations of sparse-autoencoder features.

Features are compared through the optimal-transport distance between their
activation-weighted hidden-state distributions.
"""
from .core import (
    DEFAULT_K,
    ActivationEvent,
    ActivationTable,
    EmpiricalDistribution,
    FeatureRef,
    HiddenStateStore,
    ProjectionSpec,
    build_distribution,
    centroid,
    normalize_weights,
    topk_select,
)
from .errors import SemotError
from .transport import GroundCost, Solver, TransportPlan, exact_ot, sinkhorn, wasserstein, wasserstein_1d

__all__ = [
    "DEFAULT_K", "ActivationEvent", "ActivationTable", "EmpiricalDistribution", "FeatureRef",
    "HiddenStateStore", "ProjectionSpec", "build_distribution", "centroid", "normalize_weights",
    "topk_select", "SemotError", "GroundCost", "Solver", "TransportPlan", "exact_ot", "sinkhorn",
    "wasserstein", "wasserstein_1d",
]
