"""Graph calculus for the isotropic expansion of sample covariance resolvents."""

from .core import (
    G,
    GS,
    KINDS,
    R,
    RS,
    XS,
    Edge,
    EdgeColour,
    ExpansionGraph,
    Prefactor,
    RGroup,
    X,
    check_properties,
    d_value,
    degree,
    dumps,
    is_g_edge,
    is_maximally_expanded,
    loads,
    r_groups,
)
from .evaluate import GraphEvaluator, evaluate
from .ops import (
    MAX_P,
    PairPartition,
    build_delta,
    delta_weight,
    enumerate_partitions,
    expand_diagonal,
    rho_expand,
    tau_split,
)
from .tree import ExpansionTree, build_tree, depth_bound, stops, verify_leaf_sum, verify_tree

__all__ = [
    "G", "GS", "R", "RS", "X", "XS", "KINDS",
    "Edge", "EdgeColour", "ExpansionGraph", "Prefactor", "RGroup",
    "check_properties", "d_value", "degree", "dumps", "loads",
    "is_g_edge", "is_maximally_expanded", "r_groups",
    "GraphEvaluator", "evaluate",
    "MAX_P", "PairPartition", "build_delta", "delta_weight", "enumerate_partitions",
    "expand_diagonal", "rho_expand", "tau_split",
    "ExpansionTree", "build_tree", "depth_bound", "stops", "verify_leaf_sum", "verify_tree",
]
