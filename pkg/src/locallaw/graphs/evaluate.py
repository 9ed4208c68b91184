"""Numerical evaluation of expansion graphs on a sampled factor ``X``."""

from __future__ import annotations

import itertools
import math

import numpy as np

from ..errors import InvalidParameterError, SingularError
from ..laws import mp_stieltjes_dual
from ..resolvent import CovarianceResolvents
from .core import GS, RS, XS, X, ExpansionGraph, is_g_edge, r_groups

__all__ = ["GraphEvaluator", "evaluate"]


class GraphEvaluator:
    """Evaluates graphs for one ``(X, z)`` pair, caching every minor it touches.

    ``G``-edges evaluate to entries of ``phi^{1/2} G^{(a_T)}`` (conjugate
    transposed for ``G*``, reciprocal in a denominator); R-groups evaluate to
    ``(X R^{(a_b)} X*)_{AB}`` after summing their two white indices.
    """

    def __init__(self, X, z):
        self.res = X if isinstance(X, CovarianceResolvents) else CovarianceResolvents(X)
        self.X = self.res.X
        self.M, self.N = self.X.shape
        self.z = complex(z)
        self.phi = self.M / self.N
        self.sqrt_phi = math.sqrt(self.phi)
        self.zt = self.z / self.sqrt_phi
        self.mt = complex(self.sqrt_phi * mp_stieltjes_dual(self.z, self.phi))
        self._g = {}
        self._r = {}
        self._sandwich = {}

    def g_tilde(self, rows) -> np.ndarray:
        rows = frozenset(rows)
        if rows not in self._g:
            self._g[rows] = self.sqrt_phi * self.res.G(self.z, rows=rows)
        return self._g[rows]

    def r_minor(self, rows) -> np.ndarray:
        rows = frozenset(rows)
        if rows not in self._r:
            self._r[rows] = self.res.R(self.z, rows=rows)
        return self._r[rows]

    def sandwich(self, rows, star: bool) -> np.ndarray:
        key = (frozenset(rows), star)
        if key not in self._sandwich:
            Rm = self.r_minor(rows)
            if star:
                Rm = Rm.conj().T
            self._sandwich[key] = self.X @ Rm @ self.X.conj().T
        return self._sandwich[key]

    def g_value(self, e, a_b) -> complex:
        upper = [a_b[v] for v in e.upper]
        Gt = self.g_tilde(upper)
        a, b = a_b[e.source], a_b[e.target]
        val = Gt[b, a].conjugate() if e.kind == GS else Gt[a, b]
        if e.sign == -1:
            if val == 0:
                raise SingularError("vanishing resolvent entry in a denominator")
            val = 1.0 / val
        return complex(val)

    def _check_assignment(self, g: ExpansionGraph, a_b) -> dict:
        if not isinstance(a_b, dict):
            a_b = dict(enumerate(a_b))
        vals = [a_b[v] for v in g.black]
        if len(set(vals)) != len(vals):
            raise InvalidParameterError("black indices must be distinct")
        if any(not 0 <= v < self.M for v in vals):
            raise InvalidParameterError("black index out of range")
        return a_b

    def evaluate(self, g: ExpansionGraph, a_b, method: str = "sandwich") -> complex:
        """Value of ``g`` with all white indices summed.

        ``method="sandwich"`` contracts each R-group as a matrix product;
        ``method="brute"`` sums every white index assignment explicitly.
        """
        a_b = self._check_assignment(g, a_b)
        if method == "brute":
            return self._evaluate_brute(g, a_b)
        if method != "sandwich":
            raise InvalidParameterError(f"unknown evaluation method {method!r}")
        val = complex(g.prefactor.value(self.zt, self.mt))
        rows = [a_b[v] for v in g.black]
        grouped = set()
        for grp in r_groups(g):
            grouped |= {grp.x_edge.eid, grp.centre.eid, grp.xs_edge.eid}
            S = self.sandwich(rows, grp.centre.kind == RS)
            val *= S[a_b[grp.A], a_b[grp.B]]
        for e in g.edges:
            if is_g_edge(e):
                val *= self.g_value(e, a_b)
            elif e.eid not in grouped:
                raise InvalidParameterError(f"edge {e.eid} is outside every R-group")
        return val

    def _evaluate_brute(self, g: ExpansionGraph, a_b) -> complex:
        rows = [a_b[v] for v in g.black]
        Rm = self.r_minor(rows)
        fixed = complex(g.prefactor.value(self.zt, self.mt))
        for e in g.edges:
            if is_g_edge(e):
                fixed *= self.g_value(e, a_b)
        other = [e for e in g.edges if not is_g_edge(e)]
        white = list(g.white)
        total = 0j
        for assign in itertools.product(range(self.N), repeat=len(white)):
            idx = dict(a_b)
            idx.update(zip(white, assign))
            term = 1.0 + 0j
            for e in other:
                s, t = idx[e.source], idx[e.target]
                if e.kind == X:
                    term *= self.X[s, t]
                elif e.kind == XS:
                    term *= self.X[t, s].conjugate()
                elif e.kind == RS:
                    term *= Rm[t, s].conjugate()
                else:
                    term *= Rm[s, t]
            total += term
        return fixed * total


def evaluate(g: ExpansionGraph, X, z, a_b, method: str = "sandwich") -> complex:
    """Convenience wrapper around :class:`GraphEvaluator`."""
    return GraphEvaluator(X, z).evaluate(g, a_b, method)
