import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locallaw.ensembles import EnsembleSpec, sample_covariance
from locallaw.errors import InvalidParameterError, PreconditionError, ResourceError
from locallaw.graphs import (
    G,
    GS,
    EdgeColour,
    ExpansionGraph,
    GraphEvaluator,
    PairPartition,
    Prefactor,
    build_delta,
    build_tree,
    check_properties,
    d_value,
    depth_bound,
    dumps,
    enumerate_partitions,
    expand_diagonal,
    is_maximally_expanded,
    loads,
    rho_expand,
    stops,
    tau_split,
    verify_tree,
)


def brute_partition_count(p):
    """Count set partitions of {1..p} x {1,2} keeping (k,1), (k,2) apart, by restricted growth strings."""
    elems = [(k, r) for k in range(p) for r in (0, 1)]
    n = len(elems)
    count = 0
    for labels in itertools.product(range(n), repeat=n):
        if labels[0] != 0 or any(labels[i] > max(labels[:i]) + 1 for i in range(1, n)):
            continue
        if all(labels[2 * k] != labels[2 * k + 1] for k in range(p)):
            count += 1
    return count


@pytest.mark.parametrize("p,expected", [(1, 1), (2, 7), (3, 87)])
def test_partition_counts_against_brute_force(p, expected):
    assert brute_partition_count(p) == expected
    parts = enumerate_partitions(p)
    assert len(parts) == expected
    assert len(set(parts)) == expected


def test_partition_count_p4():
    assert len(enumerate_partitions(4)) == 1657


def test_partition_errors():
    with pytest.raises(ResourceError):
        enumerate_partitions(5)
    with pytest.raises(InvalidParameterError):
        enumerate_partitions(0)
    with pytest.raises(InvalidParameterError):
        PairPartition(1, (((1, 1), (1, 2)),))


@pytest.fixture(scope="module")
def evaluator():
    X = sample_covariance(EnsembleSpec("sample-covariance", 6, 4, "complex-gaussian", seed=1))
    return GraphEvaluator(X, 0.7 + 0.6j)


def test_single_entry_value(evaluator):
    g = ExpansionGraph((0, 1)).add_edges([(0, 1, EdgeColour(G))])
    G_full = evaluator.res.G(evaluator.z)
    assert evaluator.evaluate(g, [2, 5]) == pytest.approx(np.sqrt(1.5) * G_full[2, 5])
    gs = ExpansionGraph((0, 1)).add_edges([(0, 1, EdgeColour(GS))])
    assert evaluator.evaluate(gs, [2, 5]) == pytest.approx(np.sqrt(1.5) * np.conj(G_full[5, 2]))


def test_tau_split_additive(evaluator):
    delta = build_delta(enumerate_partitions(2)[-1])
    a_b = [0, 2, 3, 5][: len(delta.black)]
    t0, t1 = tau_split(delta)
    total = evaluator.evaluate(t0, a_b) + evaluator.evaluate(t1, a_b)
    assert abs(total - evaluator.evaluate(delta, a_b)) < 1e-10


def test_tau_split_denominator(evaluator):
    g = ExpansionGraph((0, 1)).add_edges([(0, 0, EdgeColour(G, -1))])
    t0, t1 = tau_split(g)
    a_b = [1, 4]
    assert abs(evaluator.evaluate(t0, a_b) + evaluator.evaluate(t1, a_b) - evaluator.evaluate(g, a_b)) < 1e-10


def test_rho_expand_and_brute_force(evaluator):
    g = ExpansionGraph((0, 1)).add_edges([(0, 1, EdgeColour(G))])
    h = rho_expand(g)
    a_b = [3, 1]
    assert abs(evaluator.evaluate(h, a_b) - evaluator.evaluate(g, a_b)) < 1e-10
    assert abs(evaluator.evaluate(h, a_b, "brute") - evaluator.evaluate(h, a_b)) < 1e-10
    with pytest.raises(InvalidParameterError):
        evaluator.evaluate(h, a_b, "magic")
    with pytest.raises(InvalidParameterError):
        evaluator.evaluate(h, [1, 1])


def test_expand_diagonal_exact(evaluator):
    for kind, sign in [(G, 1), (GS, 1), (G, -1)]:
        g = ExpansionGraph((0,)).add_edges([(0, 0, EdgeColour(kind, sign))])
        for ell in (1, 2, 3):
            main, rem = expand_diagonal(g, ell)
            total = sum(evaluator.evaluate(h, [2]) for h in main + rem)
            assert abs(total - evaluator.evaluate(g, [2])) < 1e-10
            assert all(not h.g_edges() for h in main)
    with pytest.raises(PreconditionError):
        expand_diagonal(ExpansionGraph((0, 1)).add_edges([(0, 1, EdgeColour(G))]), 2)
    with pytest.raises(InvalidParameterError):
        expand_diagonal(ExpansionGraph((0,)).add_edges([(0, 0, EdgeColour(G))]), 0)


@pytest.mark.parametrize("p,ell", [(1, 2), (1, 4), (2, 3)])
def test_tree_exact_and_structured(evaluator, p, ell):
    for P in enumerate_partitions(p):
        delta = build_delta(P)
        a_b = list(range(len(delta.black)))
        tree = build_tree(delta, ell)
        out = verify_tree(tree, evaluator, a_b)
        assert out["max_node_defect"] < 1e-9
        assert out["leaf_relative"] < 1e-9
        assert tree.depth <= depth_bound(p, ell)
        for s in tree.leaves:
            assert stops(tree.nodes[s], ell)
            assert tree.is_leaf(s)
        for s, g in tree.nodes.items():
            assert not check_properties(g)
            if s:
                assert d_value(g) >= d_value(tree.nodes[s[1:]])


def test_node_cap():
    delta = build_delta(enumerate_partitions(2)[-1])
    with pytest.raises(ResourceError):
        build_tree(delta, 5, node_cap=5)


def test_maximally_expanded_leaf_edges():
    delta = build_delta(enumerate_partitions(2)[0])
    tree = build_tree(delta, 3)
    for s in tree.leaves:
        g = tree.nodes[s]
        if d_value(g) < 3:
            assert all(is_maximally_expanded(e, g.black) for e in g.g_edges())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 86), st.integers(2, 4))
def test_dumps_round_trip(idx, ell):
    P = enumerate_partitions(3)[idx]
    delta = build_delta(P)
    g = rho_expand(tau_split(delta)[1]) if d_value(delta) < ell and not stops(delta, ell) else delta
    back = loads(dumps(g))
    assert back == g
    assert dumps(back) == dumps(g)


def test_loads_errors():
    with pytest.raises(InvalidParameterError):
        loads("graph v2\n")
    with pytest.raises(InvalidParameterError):
        loads("graph v1\nvertex 1\n")


exps = st.tuples(*[st.integers(-2, 2)] * 4)
prefs = st.lists(st.tuples(exps, st.integers(-3, 3)), min_size=1, max_size=3).map(lambda t: Prefactor(tuple(t)))


@settings(max_examples=100, deadline=None)
@given(prefs, prefs)
def test_prefactor_algebra(a, b):
    zt, mt = 0.8 - 0.3j, -0.4 + 0.9j
    assert abs((a * b).value(zt, mt) - a.value(zt, mt) * b.value(zt, mt)) < 1e-9
    assert abs((a + b).value(zt, mt) - a.value(zt, mt) - b.value(zt, mt)) < 1e-9
    assert abs(a.conj().value(zt, mt) - np.conj(a.value(zt, mt))) < 1e-9
    assert abs((a**2).value(zt, mt) - a.value(zt, mt) ** 2) < 1e-9
