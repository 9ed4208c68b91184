"""Resolvents of ``X X*`` and ``X* X``, their minors, and the exact identities they satisfy.

Conventions
-----------
``G(z) = (X X* - z)^{-1}`` is ``M x M`` and ``R(z) = (X* X - z)^{-1}`` is
``N x N``.  Removing rows ``T`` (written ``(T)``) or columns ``T`` (written
``[T]``) is realised by zeroing them in ``X``; the resulting matrices keep
their full size, so a removed index ``i`` carries ``G_ii = -1/z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, SingularError

__all__ = [
    "SpectralDecomposition",
    "MinorSpec",
    "decompose",
    "spectral_sum",
    "quadratic_form",
    "quadratic_forms",
    "trace_resolvent",
    "CovarianceResolvents",
    "minor_resolvent",
    "identity_scale",
    "check_identities_G",
    "check_identities_R",
    "check_trace_identities",
    "check_ward",
    "check_interlacing",
]


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigen-decomposition ``A = U diag(lambda) U*`` with ascending eigenvalues."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    dim: int

    def _check_z(self, z):
        zs = np.atleast_1d(np.asarray(z, dtype=complex))
        if np.any(zs.imag == 0):
            gap = np.min(np.abs(self.eigenvalues[:, None] - zs[None, :]))
            if gap == 0:
                raise SingularError("z coincides with an eigenvalue")

    def resolvent(self, z) -> np.ndarray:
        """Dense ``(A - z)^{-1}``."""
        self._check_z(z)
        U = self.eigenvectors
        return (U / (self.eigenvalues - z)) @ U.conj().T

    def resolvent_diag(self, z) -> np.ndarray:
        self._check_z(z)
        return (np.abs(self.eigenvectors) ** 2) @ (1.0 / (self.eigenvalues - z))


def decompose(A, tol: float = 1e-12) -> SpectralDecomposition:
    """Eigen-decompose a Hermitian matrix; raises on non-Hermitian input."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidParameterError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.conj().T)) > tol * scale:
        raise InvalidParameterError("matrix is not Hermitian")
    lam, U = np.linalg.eigh(A)
    return SpectralDecomposition(lam, U, A.shape[0])


def spectral_sum(eigenvalues, weights, zs) -> np.ndarray:
    """``out[..., j] = sum_k weights[..., k] / (eigenvalues[k] - zs[j])``."""
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    inv = 1.0 / (np.asarray(eigenvalues)[:, None] - zs[None, :])
    return np.asarray(weights) @ inv


def _unit(v, name):
    v = np.asarray(v)
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise InvalidParameterError(f"{name} must be a unit vector")
    return v


def quadratic_form(decomp: SpectralDecomposition, z, v, w) -> complex:
    """``<v, (A - z)^{-1} w>``, antilinear in ``v``."""
    v = _unit(v, "v")
    w = _unit(w, "w")
    decomp._check_z(z)
    U = decomp.eigenvectors
    weights = (v.conj() @ U) * (U.conj().T @ w)
    return complex(spectral_sum(decomp.eigenvalues, weights, z)[0])


def quadratic_forms(decomp: SpectralDecomposition, zs, V, W) -> np.ndarray:
    """Batched ``<V[p], (A - z_j)^{-1} W[p]>`` as a ``(P, J)`` array."""
    decomp._check_z(zs)
    U = decomp.eigenvectors
    V = np.atleast_2d(V)
    W = np.atleast_2d(W)
    weights = (V.conj() @ U) * (W @ U.conj())
    return spectral_sum(decomp.eigenvalues, weights, zs)


def trace_resolvent(decomp: SpectralDecomposition, z):
    """``tr (A - z)^{-1}``."""
    decomp._check_z(z)
    out = spectral_sum(decomp.eigenvalues, np.ones(decomp.dim), z)
    return complex(out[0]) if np.ndim(z) == 0 else out


@dataclass(frozen=True)
class MinorSpec:
    """Rows ``(T)`` and columns ``[T]`` removed from ``X`` (0-based indices)."""

    removed_rows: frozenset = frozenset()
    removed_cols: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "removed_rows", frozenset(int(i) for i in self.removed_rows))
        object.__setattr__(self, "removed_cols", frozenset(int(i) for i in self.removed_cols))


class CovarianceResolvents:
    """Resolvents of one factor ``X`` and of its minors, with cached decompositions."""

    def __init__(self, X):
        self.X = np.asarray(X)
        self.M, self.N = self.X.shape
        self._cache = {}

    def _check(self, spec: MinorSpec):
        for i in spec.removed_rows:
            if not 0 <= i < self.M:
                raise InvalidParameterError(f"row index {i} out of range [0, {self.M})")
        for mu in spec.removed_cols:
            if not 0 <= mu < self.N:
                raise InvalidParameterError(f"column index {mu} out of range [0, {self.N})")

    def minor_matrix(self, spec: MinorSpec) -> np.ndarray:
        Xm = self.X.copy()
        if spec.removed_rows:
            Xm[sorted(spec.removed_rows), :] = 0
        if spec.removed_cols:
            Xm[:, sorted(spec.removed_cols)] = 0
        return Xm

    def decomposition(self, side: str, spec: MinorSpec = MinorSpec()) -> SpectralDecomposition:
        """Cached decomposition of ``X X*`` (``side="G"``) or ``X* X`` (``side="R"``) for a minor."""
        key = (side, spec)
        if key not in self._cache:
            self._check(spec)
            Xm = self.minor_matrix(spec)
            A = Xm @ Xm.conj().T if side == "G" else Xm.conj().T @ Xm
            A = (A + A.conj().T) / 2
            self._cache[key] = decompose(A)
        return self._cache[key]

    def G(self, z, rows=(), cols=()) -> np.ndarray:
        return self.decomposition("G", MinorSpec(frozenset(rows), frozenset(cols))).resolvent(z)

    def R(self, z, rows=(), cols=()) -> np.ndarray:
        return self.decomposition("R", MinorSpec(frozenset(rows), frozenset(cols))).resolvent(z)


def minor_resolvent(X, spec: MinorSpec, z, cache: CovarianceResolvents | None = None):
    """``(G, R)`` of the minor described by ``spec``, as full-size matrices."""
    res = cache if cache is not None else CovarianceResolvents(X)
    dG = res.decomposition("G", spec)
    dR = res.decomposition("R", spec)
    return dG.resolvent(z), dR.resolvent(z)


def identity_scale(z) -> float:
    """Conditioning scale ``max(1, eta^{-2})`` for residual tolerances."""
    eta = complex(z).imag
    return max(1.0, 1.0 / eta**2) if eta > 0 else np.inf


def _first_free(n, taken):
    for k in range(n):
        if k not in taken:
            return k
    raise InvalidParameterError("no free index left for the identity")


def check_identities_G(X, z, T, i, j, k=None, cache=None) -> dict:
    """Absolute residuals of the row-removal identities for ``G``.

    Keys: ``"Gij_Gijk"`` (off-diagonal entry through index ``k``),
    ``"Gii_inverse_k"`` (reciprocal diagonal through ``k``),
    ``"Gii_expanded"`` (Schur complement of the diagonal) and
    ``"Gij_expanded"`` (off-diagonal entry as an ``X R X*`` sandwich).
    """
    res = cache if cache is not None else CovarianceResolvents(X)
    Xa = res.X
    T = frozenset(T)
    if i in T or j in T:
        raise InvalidParameterError("i and j must not be removed")
    if k is None:
        k = _first_free(res.M, T | {i, j})
    GT = res.G(z, rows=T)
    GTk = res.G(z, rows=T | {k})
    out = {}
    out["Gij_Gijk"] = abs(GT[i, j] - GTk[i, j] - GT[i, k] * GT[k, j] / GT[k, k])
    lhs = 1.0 / GT[i, i]
    rhs = 1.0 / GTk[i, i] - GT[i, k] * GT[k, i] / (GT[i, i] * GTk[i, i] * GT[k, k])
    out["Gii_inverse_k"] = abs(lhs - rhs)
    RTi = res.R(z, rows=T | {i})
    xi = Xa[i, :]
    out["Gii_expanded"] = abs(1.0 / GT[i, i] + z + z * (xi @ RTi @ xi.conj()))
    if i != j:
        GiT = res.G(z, rows=T | {i})
        RTij = res.R(z, rows=T | {i, j})
        xj = Xa[j, :]
        rhs = z * GT[i, i] * GiT[j, j] * (xi @ RTij @ xj.conj())
        out["Gij_expanded"] = abs(GT[i, j] - rhs)
    return out


def check_identities_R(X, z, T, mu, nu, k=None, cache=None) -> dict:
    """Column-removal analogue of :func:`check_identities_G` for ``R``."""
    res = cache if cache is not None else CovarianceResolvents(X)
    Xa = res.X
    T = frozenset(T)
    if mu in T or nu in T:
        raise InvalidParameterError("mu and nu must not be removed")
    if k is None:
        k = _first_free(res.N, T | {mu, nu})
    RT = res.R(z, cols=T)
    RTk = res.R(z, cols=T | {k})
    out = {}
    out["Ruv_Ruvk"] = abs(RT[mu, nu] - RTk[mu, nu] - RT[mu, k] * RT[k, nu] / RT[k, k])
    lhs = 1.0 / RT[mu, mu]
    rhs = 1.0 / RTk[mu, mu] - RT[mu, k] * RT[k, mu] / (RT[mu, mu] * RTk[mu, mu] * RT[k, k])
    out["Ruu_inverse_k"] = abs(lhs - rhs)
    GTu = res.G(z, cols=T | {mu})
    xu = Xa[:, mu]
    out["Ruu_expanded"] = abs(1.0 / RT[mu, mu] + z + z * (xu.conj() @ GTu @ xu))
    if mu != nu:
        RuT = res.R(z, cols=T | {mu})
        GTuv = res.G(z, cols=T | {mu, nu})
        xv = Xa[:, nu]
        rhs = z * RT[mu, mu] * RuT[nu, nu] * (xu.conj() @ GTuv @ xv)
        out["Ruv_expanded"] = abs(RT[mu, nu] - rhs)
    return out


def check_trace_identities(X, z, T=(), U=(), cache=None) -> dict:
    """Residuals of the trace relations between ``G`` and ``R``.

    Traces of a minor run over the surviving indices only.
    """
    res = cache if cache is not None else CovarianceResolvents(X)
    M, N = res.M, res.N
    T, U = frozenset(T), frozenset(U)
    keep_c = [m for m in range(N) if m not in T]
    keep_r = [i for i in range(M) if i not in U]
    RT = res.R(z, cols=T)
    GT = res.G(z, cols=T)
    d_cols = np.trace(RT[np.ix_(keep_c, keep_c)]) - np.trace(GT)
    RU = res.R(z, rows=U)
    GU = res.G(z, rows=U)
    d_rows = np.trace(RU) - np.trace(GU[np.ix_(keep_r, keep_r)])
    G = res.G(z)
    R = res.R(z)
    phi = M / N
    return {
        "trace_cols": abs(d_cols - (M - (N - len(T))) / z),
        "trace_rows": abs(d_rows - ((M - len(U)) - N) / z),
        "normalized_trace": abs(np.trace(G) / M - (np.trace(R) / N / phi + (1 - phi) / (phi * z))),
    }


def check_ward(X, z, T, i, cache=None) -> float:
    """``|sum_j |G^{[T]}_{ij}|^2 - Im G^{[T]}_{ii} / eta|``."""
    z = complex(z)
    if z.imag <= 0:
        raise InvalidParameterError("Ward identity requires eta > 0")
    res = cache if cache is not None else CovarianceResolvents(X)
    G = res.G(z, cols=frozenset(T))
    return float(abs(np.sum(np.abs(G[i, :]) ** 2) - G[i, i].imag / z.imag))


def check_interlacing(X, z, T=(), U=(), cache=None) -> dict:
    """Margins ``eta |tr R^{[T]} - tr R|`` and ``eta |tr R^{(U)} - tr R|``.

    Both traces are taken over the full ``N x N`` matrices of the zeroed minor.
    """
    res = cache if cache is not None else CovarianceResolvents(X)
    z = complex(z)
    d0 = res.decomposition("R")
    base = trace_resolvent(d0, z)
    dT = res.decomposition("R", MinorSpec(frozenset(), frozenset(T)))
    dU = res.decomposition("R", MinorSpec(frozenset(U), frozenset()))
    return {
        "cols": z.imag * abs(trace_resolvent(dT, z) - base),
        "rows": z.imag * abs(trace_resolvent(dU, z) - base),
    }
