"""Graph surgery: initial graphs, index splitting, off-diagonal and diagonal expansion."""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import comb

from ..errors import InvalidParameterError, PreconditionError, ResourceError
from .core import (
    G,
    GS,
    R,
    RS,
    EdgeColour,
    ExpansionGraph,
    Prefactor,
    is_g_edge,
    is_maximally_expanded,
)

__all__ = [
    "MAX_P",
    "PairPartition",
    "enumerate_partitions",
    "build_delta",
    "delta_weight",
    "tau_split",
    "rho_expand",
    "expand_diagonal",
]

MAX_P = 4


@dataclass(frozen=True)
class PairPartition:
    """Partition of ``{1..p} x {1, 2}`` with ``(k, 1)`` and ``(k, 2)`` in different blocks.

    Blocks are sorted tuples of ``(k, r)`` pairs, ordered by their smallest element.
    """

    p: int
    blocks: tuple

    def __post_init__(self):
        elems = sorted(x for b in self.blocks for x in b)
        full = [(k, r) for k in range(1, self.p + 1) for r in (1, 2)]
        if elems != full:
            raise InvalidParameterError("blocks do not partition {1..p} x {1,2}")
        for b in self.blocks:
            ks = [k for k, _ in b]
            if len(ks) != len(set(ks)):
                raise InvalidParameterError("a block contains both (k,1) and (k,2)")
        object.__setattr__(self, "blocks", tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=min)))

    def block_of(self, elem) -> int:
        for idx, b in enumerate(self.blocks):
            if elem in b:
                return idx
        raise KeyError(elem)


def enumerate_partitions(p: int) -> list:
    """All admissible partitions for ``p`` resolvent factors."""
    if p < 1:
        raise InvalidParameterError("p must be positive")
    if p > MAX_P:
        raise ResourceError(f"p = {p} exceeds the cap {MAX_P}")
    elems = [(k, r) for k in range(1, p + 1) for r in (1, 2)]
    out = []

    def grow(i, blocks):
        if i == len(elems):
            out.append(PairPartition(p, tuple(tuple(b) for b in blocks)))
            return
        k = elems[i][0]
        for b in blocks:
            if all(kk != k for kk, _ in b):
                b.append(elems[i])
                grow(i + 1, blocks)
                b.pop()
        blocks.append([elems[i]])
        grow(i + 1, blocks)
        blocks.pop()

    grow(0, [])
    return out


def build_delta(P: PairPartition) -> ExpansionGraph:
    """Initial graph: one G-edge per ``k <= p/2`` and one G*-edge per ``k > p/2``."""
    if not isinstance(P, PairPartition):
        raise InvalidParameterError("expected a PairPartition")
    black = tuple(range(len(P.blocks)))
    g = ExpansionGraph(black)
    specs = []
    for k in range(1, P.p + 1):
        kind = G if k <= P.p / 2 else GS
        specs.append((P.block_of((k, 1)), P.block_of((k, 2)), EdgeColour(kind)))
    return g.add_edges(specs)


def delta_weight(delta: ExpansionGraph, v, a_b) -> complex:
    """Weight ``prod_e conj(v[a_source]) v[a_target]`` attached to an initial graph."""
    w = 1.0 + 0j
    for e in delta.edges:
        w *= complex(v[a_b[e.source]]).conjugate() * v[a_b[e.target]]
    return w



def tau_split(g: ExpansionGraph) -> tuple:
    """Split the first non-maximally-expanded G-edge through one more black index.

    Returns ``(tau0, tau1)`` whose values add up to the value of ``g``.
    """
    target = None
    for e in g.edges:
        if is_g_edge(e) and not is_maximally_expanded(e, g.black):
            target = e
            break
    if target is None:
        raise PreconditionError("all G-edges are maximally expanded")
    e = target
    a, b, T = e.source, e.target, e.upper
    c = next(v for v in g.black if v not in T and v not in (a, b))
    kind = e.kind
    tau0 = g.with_edge_replaced(replace(e, colour=EdgeColour(kind, e.sign, T | {c})))
    base = g.without(e.eid)
    if e.sign == 1:
        # G_ab = G_ab^(c) + G_ac G_cb / G_cc
        tau1 = base.add_edges(
            [
                (a, c, EdgeColour(kind, 1, T)),
                (c, b, EdgeColour(kind, 1, T)),
                (c, c, EdgeColour(kind, -1, T)),
            ]
        )
    else:
        # 1/G_aa = 1/G_aa^(c) - G_ac G_ca / (G_aa G_aa^(c) G_cc)
        tau1 = base.add_edges(
            [
                (a, c, EdgeColour(kind, 1, T)),
                (c, a, EdgeColour(kind, 1, T)),
                (a, a, EdgeColour(kind, -1, T)),
                (a, a, EdgeColour(kind, -1, T | {c})),
                (c, c, EdgeColour(kind, -1, T)),
            ]
        ).scaled(Prefactor.monomial(-1))
    return tau0, tau1


def rho_expand(g: ExpansionGraph) -> ExpansionGraph:
    """Replace every maximally expanded off-diagonal G-edge by diagonal entries and an R-group."""
    todo = [e for e in g.edges if is_g_edge(e) and not e.is_loop and is_maximally_expanded(e, g.black)]
    full = g.black_set
    for e in todo:
        a, b, kind = e.source, e.target, e.kind
        centre = R if kind == G else RS
        pref = Prefactor.monomial(zt=1) if kind == G else Prefactor.monomial(ztc=1)
        g = g.without(e.eid).add_edges(
            [
                (a, a, EdgeColour(kind, 1, full - {a, b})),
                (b, b, EdgeColour(kind, 1, full - {b})),
            ]
        )
        g = g.add_r_group(a, b, centre).scaled(pref)
    return g


def expand_diagonal(g: ExpansionGraph, ell: int, max_graphs: int = 200_000) -> tuple:
    """Expand every diagonal maximally expanded G-entry in terms of diagonal R-groups.

    Denominators use ``1/G_aa = -zt - zt S_aa``.  Numerators use the exact
    identity ``G_aa = mt sum_{k<ell} (mt E)^k + (mt E)^ell G_aa`` with
    ``mt E = mt zt S_aa + (mt zt + 1)``, where ``S_aa`` is a diagonal R-group.
    Terms with the same number of R-groups are merged into one graph with a
    polynomial prefactor.

    Returns
    -------
    main : list of ExpansionGraph
        Graphs without G-edges.
    remainder : list of ExpansionGraph
        Graphs that keep at least one numerator G-edge; their values sum to
        the truncation error.  Once an edge is kept, the G-edges processed
        after it stay unexpanded in that graph.
    """
    if ell < 1:
        raise InvalidParameterError("ell must be at least 1")
    for e in g.g_edges():
        if not e.is_loop or not is_maximally_expanded(e, g.black):
            raise PreconditionError(f"edge {e.eid} is not a maximally expanded diagonal G-edge")
    main_coeffs, rem_coeffs = _numerator_coefficients(ell)
    work = [(g, False)]
    for eid in [e.eid for e in g.g_edges()]:
        nxt = []
        for h, is_rem in work:
            if is_rem:
                # remainder graphs keep their remaining G-edges unexpanded
                nxt.append((h, True))
                continue
            e = h.edge(eid)
            a = e.source
            star = e.kind == GS
            centre = RS if star else R
            base = h.without(eid)
            if e.sign == -1:
                zt = Prefactor.monomial(-1, zt=1)
                zt = zt.conj() if star else zt
                nxt.append((base.scaled(zt), False))
                nxt.append((base.add_r_group(a, a, centre).scaled(zt), False))
                continue
            for j, c in enumerate(main_coeffs):
                nxt.append((_with_groups(base, a, centre, j).scaled(c.conj() if star else c), False))
            for j, c in enumerate(rem_coeffs):
                nxt.append((_with_groups(h, a, centre, j).scaled(c.conj() if star else c), True))
        if len(nxt) > max_graphs:
            raise ResourceError(f"diagonal expansion exceeds {max_graphs} graphs")
        work = nxt
    main = [h for h, rem in work if not rem]
    remainder = [h for h, rem in work if rem]
    return main, remainder


def _with_groups(h, a, centre, j):
    for _ in range(j):
        h = h.add_r_group(a, a, centre)
    return h


def _numerator_coefficients(ell):
    # coefficient of S^j in mt sum_{k<ell} (mt zt S + q)^k and in (mt zt S + q)^ell,
    # with q = mt zt + 1
    u = Prefactor.monomial(1, zt=1, mt=1)
    q = u + Prefactor()
    mt = Prefactor.monomial(1, mt=1)
    main = []
    for j in range(ell):
        c = Prefactor.monomial(0)
        for k in range(j, ell):
            c = c + Prefactor.monomial(comb(k, j)) * (u**j) * (q ** (k - j))
        main.append(mt * c)
    rem = [Prefactor.monomial(comb(ell, j)) * (u**j) * (q ** (ell - j)) for j in range(ell + 1)]
    return main, rem
