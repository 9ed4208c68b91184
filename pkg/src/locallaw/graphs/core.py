"""Coloured multigraphs encoding monomials in resolvent entries.

Vertices are integers.  Black vertices carry the fixed outer indices (values
in ``{0..M-1}``), white vertices are summed over ``{0..N-1}``.  An edge colour
is a triple ``(xi1, xi2, xi3)``: the matrix kind, numerator (+1) or
denominator (-1), and the set of black vertices whose indices are removed
from the ``G`` entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..errors import InvalidParameterError

__all__ = [
    "G",
    "GS",
    "R",
    "RS",
    "X",
    "XS",
    "KINDS",
    "EdgeColour",
    "Edge",
    "Prefactor",
    "ExpansionGraph",
    "RGroup",
    "is_g_edge",
    "is_maximally_expanded",
    "r_groups",
    "d_value",
    "degree",
    "check_properties",
    "dumps",
    "loads",
]

G, GS, R, RS, X, XS = "G", "G*", "R", "R*", "X", "X*"
KINDS = (G, GS, R, RS, X, XS)


@dataclass(frozen=True)
class EdgeColour:
    xi1: str
    xi2: int = 1
    xi3: frozenset = frozenset()

    def __post_init__(self):
        if self.xi1 not in KINDS:
            raise InvalidParameterError(f"unknown edge kind {self.xi1!r}")
        if self.xi2 not in (1, -1):
            raise InvalidParameterError("xi2 must be +1 or -1")
        object.__setattr__(self, "xi3", frozenset(self.xi3))


@dataclass(frozen=True)
class Edge:
    eid: int
    source: int
    target: int
    colour: EdgeColour

    @property
    def kind(self) -> str:
        return self.colour.xi1

    @property
    def sign(self) -> int:
        return self.colour.xi2

    @property
    def upper(self) -> frozenset:
        return self.colour.xi3

    @property
    def is_loop(self) -> bool:
        return self.source == self.target


@dataclass(frozen=True)
class Prefactor:
    """Exact Laurent polynomial in ``zt, conj(zt), mt, conj(mt)`` with integer coefficients.

    ``zt`` is the rescaled spectral parameter and ``mt`` the rescaled dual
    Stieltjes transform.  ``terms`` holds ``((a, b, c, d), coeff)`` pairs for
    the monomials ``coeff * zt^a * conj(zt)^b * mt^c * conj(mt)^d``; exponents
    may be negative.  The expansion tree only ever produces single monomials.
    """

    terms: tuple = (((0, 0, 0, 0), 1),)

    def __post_init__(self):
        acc = {}
        for exps, c in self.terms:
            exps = tuple(int(x) for x in exps)
            acc[exps] = acc.get(exps, 0) + int(c)
        object.__setattr__(self, "terms", tuple(sorted((k, v) for k, v in acc.items() if v != 0)))

    @classmethod
    def monomial(cls, coeff: int = 1, zt: int = 0, ztc: int = 0, mt: int = 0, mtc: int = 0) -> "Prefactor":
        return cls((((zt, ztc, mt, mtc), coeff),))

    @property
    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def __mul__(self, other: "Prefactor") -> "Prefactor":
        out = []
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                out.append((tuple(x + y for x, y in zip(e1, e2)), c1 * c2))
        return Prefactor(tuple(out))

    def __add__(self, other: "Prefactor") -> "Prefactor":
        return Prefactor(self.terms + other.terms)

    def __pow__(self, n: int) -> "Prefactor":
        out = Prefactor()
        for _ in range(n):
            out = out * self
        return out

    def conj(self) -> "Prefactor":
        return Prefactor(tuple(((b, a, d, c), k) for (a, b, c, d), k in self.terms))

    def value(self, zt: complex, mt: complex) -> complex:
        ztc, mtc = zt.conjugate(), mt.conjugate()
        return sum(k * zt**a * ztc**b * mt**c * mtc**d for (a, b, c, d), k in self.terms)


@dataclass(frozen=True)
class RGroup:
    x_edge: Edge
    centre: Edge
    xs_edge: Edge

    @property
    def A(self) -> int:
        return self.x_edge.source

    @property
    def B(self) -> int:
        return self.xs_edge.target

    @property
    def diagonal(self) -> bool:
        return self.A == self.B


@dataclass(frozen=True)
class ExpansionGraph:
    """Immutable coloured multigraph with an exact prefactor.

    ``black`` is ordered; the order fixes which vertex an expansion step uses
    first.  Edge ids record creation order.
    """

    black: tuple
    white: tuple = ()
    edges: tuple = ()
    prefactor: Prefactor = field(default_factory=Prefactor)
    next_eid: int = 0
    next_vertex: int = 0

    def __post_init__(self):
        nv = max(list(self.black) + list(self.white), default=-1) + 1
        if self.next_vertex < nv:
            object.__setattr__(self, "next_vertex", nv)
        ne = max((e.eid for e in self.edges), default=-1) + 1
        if self.next_eid < ne:
            object.__setattr__(self, "next_eid", ne)

    @property
    def black_set(self) -> frozenset:
        return frozenset(self.black)

    def g_edges(self) -> list:
        return [e for e in self.edges if is_g_edge(e)]

    def edge(self, eid: int) -> Edge:
        for e in self.edges:
            if e.eid == eid:
                return e
        raise KeyError(eid)

    def without(self, eid: int) -> "ExpansionGraph":
        return replace(self, edges=tuple(e for e in self.edges if e.eid != eid))

    def with_edge_replaced(self, new: Edge) -> "ExpansionGraph":
        return replace(self, edges=tuple(new if e.eid == new.eid else e for e in self.edges))

    def add_edges(self, specs) -> "ExpansionGraph":
        """Append edges given as ``(source, target, colour)`` triples."""
        eid = self.next_eid
        new = []
        for s, t, c in specs:
            new.append(Edge(eid, s, t, c))
            eid += 1
        return replace(self, edges=self.edges + tuple(new), next_eid=eid)

    def add_white(self, count: int) -> tuple["ExpansionGraph", list]:
        ids = list(range(self.next_vertex, self.next_vertex + count))
        g = replace(self, white=self.white + tuple(ids), next_vertex=self.next_vertex + count)
        return g, ids

    def scaled(self, p: Prefactor) -> "ExpansionGraph":
        return replace(self, prefactor=self.prefactor * p)

    def add_r_group(self, a: int, b: int, centre_kind: str) -> "ExpansionGraph":
        """Append the chain ``a -X-> k -R-> l -X*-> b`` with fresh white ``k, l``."""
        g, (k, l) = self.add_white(2)
        return g.add_edges(
            [
                (a, k, EdgeColour(X)),
                (k, l, EdgeColour(centre_kind)),
                (l, b, EdgeColour(XS)),
            ]
        )


def is_g_edge(e: Edge) -> bool:
    return e.kind in (G, GS)


def is_maximally_expanded(e: Edge, black) -> bool:
    return is_g_edge(e) and e.upper == frozenset(black) - {e.source, e.target}


def degree(g: ExpansionGraph, v: int) -> int:
    """Number of edge endpoints at ``v`` (loops count twice)."""
    return sum((e.source == v) + (e.target == v) for e in g.edges)


def r_groups(g: ExpansionGraph) -> list:
    """All R-groups of ``g``, in the creation order of their centres."""
    white = set(g.white)
    by_target = {}
    by_source = {}
    for e in g.edges:
        if e.kind == X and e.target in white:
            by_target.setdefault(e.target, []).append(e)
        if e.kind == XS and e.source in white:
            by_source.setdefault(e.source, []).append(e)
    out = []
    for e in g.edges:
        if e.kind not in (R, RS):
            continue
        xin = by_target.get(e.source, [])
        xout = by_source.get(e.target, [])
        if len(xin) == 1 and len(xout) == 1 and degree(g, e.source) == 2 and degree(g, e.target) == 2:
            if e.source != e.target:
                out.append(RGroup(xin[0], e, xout[0]))
    return out


def d_value(g: ExpansionGraph) -> int:
    """Off-diagonal G-edges plus off-diagonal R-groups."""
    n = sum(1 for e in g.edges if is_g_edge(e) and not e.is_loop)
    return n + sum(1 for grp in r_groups(g) if not grp.diagonal)


def check_properties(g: ExpansionGraph) -> list:
    """Return a list of violated structural properties (empty if none)."""
    black, white = set(g.black), set(g.white)
    bad = []
    if black & white:
        bad.append("black and white vertex sets overlap")
    for e in g.edges:
        tag = f"edge {e.eid} ({e.kind})"
        if e.source not in black | white or e.target not in black | white:
            bad.append(f"{tag}: endpoint is not a vertex")
            continue
        if is_g_edge(e) and not (e.source in black and e.target in black):
            bad.append(f"{tag}: G-edge must join black vertices")
        if e.kind in (R, RS) and not (e.source in white and e.target in white):
            bad.append(f"{tag}: R-edge must join white vertices")
        if e.kind == X and not (e.source in black and e.target in white):
            bad.append(f"{tag}: X-edge must go from black to white")
        if e.kind == XS and not (e.source in white and e.target in black):
            bad.append(f"{tag}: X*-edge must go from white to black")
        if e.sign == -1 and not (is_g_edge(e) and e.is_loop):
            bad.append(f"{tag}: only G loops may sit in a denominator")
        if e.upper and not (is_g_edge(e) and e.upper <= black - {e.source, e.target}):
            bad.append(f"{tag}: upper indices must be black and avoid the endpoints")
    covered = set()
    for grp in r_groups(g):
        covered |= {grp.x_edge.eid, grp.centre.eid, grp.xs_edge.eid}
    for e in g.edges:
        if e.kind in (X, XS, R, RS) and e.eid not in covered:
            bad.append(f"edge {e.eid} ({e.kind}) is not part of an R-group")
    for w in white:
        if degree(g, w) != 2:
            bad.append(f"white vertex {w} has degree {degree(g, w)}")
    return bad


def _fmt_set(s) -> str:
    return "{" + ",".join(str(v) for v in sorted(s)) + "}"


def dumps(g: ExpansionGraph) -> str:
    """Text serialization.

    Format::

        graph v1
        black 0 1 2
        white 3 4
        prefactor <coeff> <zt> <ztc> <mt> <mtc> [; <coeff> <zt> <ztc> <mt> <mtc> ...]
        edge <eid> <source> <target> <kind> <+|-> {<upper>}
    """
    lines = [
        "graph v1",
        "black " + " ".join(str(v) for v in g.black),
        "white " + " ".join(str(v) for v in g.white),
        "prefactor " + " ; ".join(f"{k} {a} {b} {c} {d}" for (a, b, c, d), k in g.prefactor.terms),
    ]
    for e in g.edges:
        sign = "+" if e.sign == 1 else "-"
        lines.append(f"edge {e.eid} {e.source} {e.target} {e.kind} {sign} {_fmt_set(e.upper)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> ExpansionGraph:
    """Inverse of :func:`dumps`."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0] != "graph v1":
        raise InvalidParameterError("not a serialized graph (missing 'graph v1' header)")
    black, white, pref, edges = (), (), Prefactor(), []
    for ln in lines[1:]:
        head, _, rest = ln.partition(" ")
        parts = rest.split()
        if head == "black":
            black = tuple(int(v) for v in parts)
        elif head == "white":
            white = tuple(int(v) for v in parts)
        elif head == "prefactor":
            terms = []
            for chunk in rest.split(";"):
                k, a, b, c, d = (int(v) for v in chunk.split())
                terms.append(((a, b, c, d), k))
            pref = Prefactor(tuple(terms))
        elif head == "edge":
            eid, s, t, kind, sign, upper = parts
            inner = upper.strip("{}")
            up = frozenset(int(v) for v in inner.split(",")) if inner else frozenset()
            edges.append(Edge(int(eid), int(s), int(t), EdgeColour(kind, 1 if sign == "+" else -1, up)))
        else:
            raise InvalidParameterError(f"unknown record {head!r}")
    return ExpansionGraph(black, white, tuple(edges), pref)
