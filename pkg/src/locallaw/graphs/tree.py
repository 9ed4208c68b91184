"""Binary expansion tree driven by the index-splitting and off-diagonal expansion steps."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import InvalidParameterError, ResourceError
from .core import ExpansionGraph, d_value, is_g_edge, is_maximally_expanded
from .evaluate import GraphEvaluator
from .ops import rho_expand, tau_split

__all__ = ["ExpansionTree", "stops", "depth_bound", "build_tree", "verify_tree", "verify_leaf_sum"]

DEFAULT_NODE_CAP = 100_000


def stops(g: ExpansionGraph, ell: int) -> bool:
    """Stopping rule: ``d(g) >= ell`` or every G-edge is maximally expanded."""
    if d_value(g) >= ell:
        return True
    return all(is_maximally_expanded(e, g.black) for e in g.edges if is_g_edge(e))


def depth_bound(p: int, ell: int) -> int:
    return 2 * p * (p + 6 * ell)


@dataclass
class ExpansionTree:
    """Nodes keyed by binary strings; the children of ``s`` are ``"0" + s`` and ``"1" + s``."""

    ell: int
    nodes: dict = field(default_factory=dict)
    trivial_leaves: list = field(default_factory=list)
    nontrivial_leaves: list = field(default_factory=list)

    @property
    def root(self) -> ExpansionGraph:
        return self.nodes[""]

    @property
    def leaves(self) -> list:
        return sorted(self.trivial_leaves + self.nontrivial_leaves, key=lambda s: (len(s), s))

    @property
    def depth(self) -> int:
        return max(len(s) for s in self.nodes)

    def children(self, sigma: str) -> tuple:
        return ("0" + sigma, "1" + sigma)

    def is_leaf(self, sigma: str) -> bool:
        return "0" + sigma not in self.nodes


def build_tree(delta: ExpansionGraph, ell: int, node_cap: int = DEFAULT_NODE_CAP) -> ExpansionTree:
    """Grow the tree from ``delta`` until every leaf satisfies the stopping rule.

    Raises ``ResourceError`` (carrying the partial tree) once more than
    ``node_cap`` nodes would be created.
    """
    if ell < 1:
        raise InvalidParameterError("ell must be at least 1")
    tree = ExpansionTree(ell)
    tree.nodes[""] = delta
    stack = [""]
    while stack:
        sigma = stack.pop()
        g = tree.nodes[sigma]
        if stops(g, ell):
            if d_value(g) >= ell:
                tree.trivial_leaves.append(sigma)
            else:
                tree.nontrivial_leaves.append(sigma)
            continue
        if len(tree.nodes) + 2 > node_cap:
            raise ResourceError(f"expansion tree exceeds {node_cap} nodes", partial=tree)
        t0, t1 = tau_split(g)
        for bit, child in (("1", t1), ("0", t0)):
            tree.nodes[bit + sigma] = rho_expand(child)
            stack.append(bit + sigma)
    return tree


def verify_tree(tree: ExpansionTree, evaluator: GraphEvaluator, a_b) -> dict:
    """Evaluate every node and report the worst relative additivity defect.

    Returns a dict with the per-node defects, the leaf-sum residual and the values.
    """
    values = {s: evaluator.evaluate(g, a_b) for s, g in tree.nodes.items()}
    worst = 0.0
    for s in tree.nodes:
        if tree.is_leaf(s):
            continue
        c0, c1 = tree.children(s)
        defect = abs(values[s] - values[c0] - values[c1])
        scale = abs(values[s]) + abs(values[c0]) + abs(values[c1])
        worst = max(worst, defect / scale if scale > 0 else defect)
    leaf_sum = sum(values[s] for s in tree.leaves)
    root = values[""]
    return {
        "values": values,
        "max_node_defect": worst,
        "leaf_sum": leaf_sum,
        "root": root,
        "leaf_residual": abs(root - leaf_sum),
        "leaf_relative": abs(root - leaf_sum) / abs(root) if root != 0 else abs(leaf_sum),
    }


def verify_leaf_sum(delta: ExpansionGraph, X, z, a_b, ell: int, node_cap: int = DEFAULT_NODE_CAP) -> float:
    """``|A(delta) - sum over leaves A(leaf)|`` with white indices summed."""
    tree = build_tree(delta, ell, node_cap)
    ev = GraphEvaluator(X, z)
    root = ev.evaluate(delta, a_b)
    return abs(root - sum(ev.evaluate(tree.nodes[s], a_b) for s in tree.leaves))
