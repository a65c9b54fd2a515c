"""Multi-view constrained clustering with cross-view constraint propagation."""

from .model import (
    CANNOT_LINK,
    MUST_LINK,
    Constraint,
    ConstraintSet,
    MappedSubset,
    RelationMap,
    ViewData,
    build_closure,
    map_constraints,
    mapped_subset,
    max_union,
)
from .ckmeans import ClusteringConfig, ClusterModel, cluster
from .coem import CoEmConfig, run_multi_view, run_single_view_cp, run_two_view
from .propagation import ClusterGaussians, PropagationParams, propagate

__all__ = [
    "CANNOT_LINK",
    "MUST_LINK",
    "Constraint",
    "ConstraintSet",
    "MappedSubset",
    "RelationMap",
    "ViewData",
    "build_closure",
    "map_constraints",
    "mapped_subset",
    "max_union",
    "ClusteringConfig",
    "ClusterModel",
    "cluster",
    "CoEmConfig",
    "run_multi_view",
    "run_single_view_cp",
    "run_two_view",
    "ClusterGaussians",
    "PropagationParams",
    "propagate",
]

__version__ = "0.1.0"
