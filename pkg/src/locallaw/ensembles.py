"""Random matrix ensembles: sample covariance factors and generalized Wigner matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, ResourceError

__all__ = [
    "ENTRY_TAGS",
    "EntryDistribution",
    "VarianceProfile",
    "EnsembleSpec",
    "substream",
    "draw_entries",
    "entry_scale",
    "sample_covariance",
    "generalized_wigner",
    "build_profile",
    "validate_profile",
]

ENTRY_TAGS = ("complex-gaussian", "real-gaussian", "rademacher", "standardized-uniform")

# default cap on the number of matrix entries a single draw may allocate
DEFAULT_MAX_ENTRIES = 50_000_000


@dataclass(frozen=True)
class EntryDistribution:
    """Standardized entry law: mean 0 and variance 1."""

    tag: str = "complex-gaussian"

    def __post_init__(self):
        if self.tag not in ENTRY_TAGS:
            raise InvalidParameterError(f"unknown entry distribution {self.tag!r}; valid: {ENTRY_TAGS}")

    @property
    def is_complex(self) -> bool:
        return self.tag == "complex-gaussian"

    @property
    def fourth_moment(self) -> float:
        """Exact ``E|xi|^4``."""
        return {"complex-gaussian": 2.0, "real-gaussian": 3.0, "rademacher": 1.0, "standardized-uniform": 1.8}[self.tag]

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.tag == "complex-gaussian":
            re = rng.standard_normal(shape)
            im = rng.standard_normal(shape)
            return (re + 1j * im) * math.sqrt(0.5)
        if self.tag == "real-gaussian":
            return rng.standard_normal(shape)
        if self.tag == "rademacher":
            return rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=shape)

    def sample_real(self, rng: np.random.Generator, shape) -> np.ndarray:
        """Real-valued companion law, used on the Wigner diagonal."""
        if self.tag == "complex-gaussian":
            return rng.standard_normal(shape)
        return self.sample(rng, shape)


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the counter tuple ``keys`` under a master seed.

    The stream depends only on ``(seed, keys)``, never on call order.
    """
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def draw_entries(entry: EntryDistribution | str, n: int, seed: int = 0) -> np.ndarray:
    """Draw ``n`` standardized entries (used for moment checks)."""
    if isinstance(entry, str):
        entry = EntryDistribution(entry)
    return entry.sample(substream(seed, 0xE17), n)


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    """Symmetric variance matrix ``S`` of a generalized Wigner matrix."""

    S: np.ndarray
    mode: str = "strict"
    C: float = 4.0

    def __post_init__(self):
        validate_profile(self.S, self.mode, self.C)

    @property
    def N(self) -> int:
        return self.S.shape[0]


def validate_profile(S, mode: str = "strict", C: float = 4.0, tol: float = 1e-12) -> None:
    """Raise ``InvalidParameterError`` unless ``S`` is an admissible variance profile."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidParameterError("variance profile must be a square matrix")
    if mode not in ("strict", "relaxed"):
        raise InvalidParameterError(f"unknown profile mode {mode!r}")
    N = S.shape[0]
    if np.any(S < 0):
        raise InvalidParameterError("variances must be nonnegative")
    if not np.array_equal(S, S.T):
        raise InvalidParameterError("variance profile must be symmetric")
    rows = S.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > tol:
        raise InvalidParameterError(f"row sums deviate from 1 by {np.max(np.abs(rows - 1.0)):.3g}")
    if np.max(S) > C / N * (1 + 1e-12):
        raise InvalidParameterError(f"variances exceed C/N with C = {C}")
    if mode == "strict" and np.min(S) < 1.0 / (C * N) * (1 - 1e-12):
        raise InvalidParameterError(f"variances fall below 1/(C N) with C = {C}")


def build_profile(kind: str, t: float, N: int, seed: int = 0, C: float = 4.0) -> VarianceProfile:
    """Flat profile ``1/N`` or a convex mix ``(1-t)/N + t P/N``.

    ``P`` is a random symmetric matrix with unit row means and entries in
    ``[1/2, 3/2]``, obtained by double-centering a uniform random matrix.
    """
    if not 0 <= t < 1:
        raise InvalidParameterError("mixing weight t must lie in [0, 1)")
    if N <= 0:
        raise InvalidParameterError("N must be positive")
    if kind == "flat":
        return VarianceProfile(np.full((N, N), 1.0 / N), "strict", C)
    if kind != "convex-mix":
        raise InvalidParameterError(f"unknown profile kind {kind!r}; valid: flat, convex-mix")
    rng = substream(seed, 0x5AA)
    W = rng.uniform(-1.0, 1.0, size=(N, N))
    W = (W + W.T) / 2
    r = W.mean(axis=1)
    B = W - r[:, None] - r[None, :] + W.mean()
    B = (B + B.T) / 2
    peak = np.max(np.abs(B))
    P = np.ones((N, N)) if peak == 0 else 1.0 + B / (2 * peak)
    S = ((1 - t) + t * P) / N
    # remove the last ulp-level drift of the row sums symmetrically
    d = 1.0 / np.sqrt(S.sum(axis=1))
    S = S * d[:, None] * d[None, :]
    S = (S + S.T) / 2
    return VarianceProfile(S, "strict", C)


@dataclass(frozen=True)
class EnsembleSpec:
    """Complete description of a random matrix ensemble.

    ``kind`` is ``"sample-covariance"`` (an ``M x N`` factor ``X``) or
    ``"generalized-wigner"`` (an ``N x N`` Hermitian ``H``; ``M`` is ignored).
    """

    kind: str = "sample-covariance"
    M: int = 100
    N: int = 100
    entry: EntryDistribution = field(default_factory=EntryDistribution)
    profile: VarianceProfile | None = None
    seed: int = 0
    max_entries: int = DEFAULT_MAX_ENTRIES

    def __post_init__(self):
        if self.kind not in ("sample-covariance", "generalized-wigner"):
            raise InvalidParameterError(f"unknown ensemble kind {self.kind!r}")
        if self.M <= 0 or self.N <= 0:
            raise InvalidParameterError("dimensions must be positive")
        if isinstance(self.entry, str):
            object.__setattr__(self, "entry", EntryDistribution(self.entry))
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")

    @property
    def phi(self) -> float:
        return self.M / self.N

    def to_config(self) -> str:
        """Human-readable ``key = value`` serialization."""
        profile = "none"
        if self.profile is not None:
            flat = np.allclose(self.profile.S, 1.0 / self.profile.N, rtol=0, atol=0)
            profile = "flat" if flat else "custom"
        lines = [
            f"kind = {self.kind}",
            f"M = {self.M}",
            f"N = {self.N}",
            f"entry = {self.entry.tag}",
            f"profile = {profile}",
            f"seed = {self.seed}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config(cls, text: str) -> "EnsembleSpec":
        vals = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            vals[key.strip()] = value.strip()
        unknown = set(vals) - {"kind", "M", "N", "entry", "profile", "seed"}
        if unknown:
            raise InvalidParameterError(f"unknown ensemble keys {sorted(unknown)}")
        kind = vals.get("kind", "sample-covariance")
        N = int(vals.get("N", 100))
        M = int(vals.get("M", N))
        profile = None
        if vals.get("profile", "none") == "flat":
            profile = build_profile("flat", 0.0, N)
        elif vals.get("profile", "none") not in ("none", "flat"):
            raise InvalidParameterError("only 'flat' or 'none' profiles can be read from a config")
        return cls(kind, M, N, EntryDistribution(vals.get("entry", "complex-gaussian")), profile, int(vals.get("seed", 0)))


def entry_scale(M: int, N: int) -> float:
    """Standard deviation of a sample covariance entry, ``(N M)^{-1/4}``."""
    return (N * M) ** -0.25


def sample_covariance(spec: EnsembleSpec, trial: int = 0) -> np.ndarray:
    """Draw the ``M x N`` factor ``X`` with ``E|X_{i mu}|^2 = 1/sqrt(N M)``."""
    if spec.kind != "sample-covariance":
        raise InvalidParameterError("spec does not describe a sample covariance ensemble")
    if spec.M * spec.N > spec.max_entries:
        raise ResourceError(f"{spec.M} x {spec.N} exceeds the entry budget {spec.max_entries}")
    rng = substream(spec.seed, trial, 1)
    return spec.entry.sample(rng, (spec.M, spec.N)) * entry_scale(spec.M, spec.N)


def generalized_wigner(spec: EnsembleSpec, trial: int = 0) -> np.ndarray:
    """Draw an ``N x N`` Hermitian matrix with ``Var(H_ij) = S_ij``."""
    if spec.kind != "generalized-wigner":
        raise InvalidParameterError("spec does not describe a generalized Wigner ensemble")
    N = spec.N
    if N * N > spec.max_entries:
        raise ResourceError(f"{N} x {N} exceeds the entry budget {spec.max_entries}")
    profile = spec.profile if spec.profile is not None else build_profile("flat", 0.0, N)
    if profile.N != N:
        raise InvalidParameterError("profile dimension does not match N")
    rng = substream(spec.seed, trial, 2)
    sd = np.sqrt(profile.S)
    U = np.triu(spec.entry.sample(rng, (N, N)) * sd, k=1)
    diag = spec.entry.sample_real(rng, N) * np.sqrt(np.diag(profile.S))
    H = U + U.conj().T
    H[np.diag_indices(N)] = diag
    return H
