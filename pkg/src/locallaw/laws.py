"""Marchenko-Pastur and semicircle laws, control parameters and spectral domains.

All functions accept complex scalars or numpy arrays for the spectral
parameter unless stated otherwise. The aspect ratio ``phi`` is ``M / N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate, optimize

from .errors import BranchError, DomainError, InvalidParameterError, SingularError

__all__ = [
    "AspectRatio",
    "SpectralPoint",
    "DomainSpec",
    "LawEvaluation",
    "RescaledParams",
    "mp_edges",
    "mp_density",
    "mp_mass_above",
    "mp_stieltjes",
    "mp_stieltjes_dual",
    "sc_density",
    "sc_stieltjes",
    "kappa",
    "psi_from_im",
    "control_psi",
    "evaluate_law",
    "rescaled_params",
    "stability_operator",
    "stability_roots",
    "lattice_L",
    "classical_locations",
    "sc_classical_locations",
    "law_asymptotics_check",
]


@dataclass(frozen=True)
class AspectRatio:
    """Ratio ``phi = M / N`` stored together with the integer dimensions."""

    M: int
    N: int

    def __post_init__(self):
        if self.M <= 0 or self.N <= 0:
            raise InvalidParameterError("M and N must be positive integers")

    @property
    def phi(self) -> float:
        return self.M / self.N

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.M, self.N)

    @property
    def K(self) -> int:
        return min(self.M, self.N)

    def within_power_bounds(self, C: float) -> bool:
        """Check ``N^{1/C} <= M <= N^C``."""
        return self.N ** (1.0 / C) <= self.M <= self.N**C


@dataclass(frozen=True)
class SpectralPoint:
    """Spectral parameter ``z = E + i eta`` with ``eta >= 0``."""

    E: float
    eta: float

    def __post_init__(self):
        if not self.eta >= 0:
            raise InvalidParameterError("eta must be nonnegative")

    @property
    def z(self) -> complex:
        return complex(self.E, self.eta)

    @classmethod
    def from_complex(cls, z) -> "SpectralPoint":
        z = complex(z)
        return cls(z.real, z.imag)


def _phi_value(phi) -> float:
    if isinstance(phi, AspectRatio):
        return phi.phi
    phi = float(phi)
    if not phi > 0:
        raise InvalidParameterError(f"aspect ratio must be positive, got {phi}")
    return phi


def _z_value(z):
    if isinstance(z, SpectralPoint):
        return z.z
    if np.ndim(z) == 0:
        return complex(z)
    return np.asarray(z, dtype=complex)


def mp_edges(phi) -> tuple[float, float]:
    """Edges ``(gamma_minus, gamma_plus)`` of the Marchenko-Pastur law."""
    phi = _phi_value(phi)
    s = math.sqrt(phi) + 1.0 / math.sqrt(phi)
    return max(s - 2.0, 0.0), s + 2.0


def kappa(E, phi):
    """Distance of ``E`` to the nearest edge of the MP spectrum."""
    lo, hi = mp_edges(phi)
    E = np.asarray(E, dtype=float)
    out = np.minimum(np.abs(hi - E), np.abs(lo - E))
    return float(out) if out.ndim == 0 else out


def mp_density(x, phi):
    """Continuous MP density at ``x`` and the atom mass at the origin.

    Returns
    -------
    density : float or ndarray
        ``sqrt(phi) / (2 pi) * sqrt((x - gamma_-)(gamma_+ - x))_+ / x``.
    atom : float
        ``max(1 - phi, 0)``.
    """
    phi = _phi_value(phi)
    lo, hi = mp_edges(phi)
    x = np.asarray(x, dtype=float)
    prod = np.clip((x - lo) * (hi - x), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(prod > 0, math.sqrt(phi) / (2 * math.pi) * np.sqrt(prod) / x, 0.0)
    dens = float(dens) if dens.ndim == 0 else dens
    return dens, max(1.0 - phi, 0.0)


def _theta_of(x, lo, hi):
    s = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    return np.arcsin(np.sqrt(s))


def _mp_theta_integrand(theta, phi, lo, hi):
    # x = lo + (hi - lo) sin^2(theta) removes the endpoint square roots
    s, c = math.sin(theta), math.cos(theta)
    x = lo + (hi - lo) * s * s
    return math.sqrt(phi) / math.pi * (hi - lo) ** 2 * (s * c) ** 2 / x


def mp_mass_above(x, phi) -> float:
    """Continuous MP mass of ``[x, infinity)``."""
    phi = _phi_value(phi)
    lo, hi = mp_edges(phi)
    if x >= hi:
        return 0.0
    t0 = float(_theta_of(max(x, lo), lo, hi))
    val, _ = integrate.quad(
        _mp_theta_integrand, t0, math.pi / 2, args=(phi, lo, hi), epsabs=1e-14, epsrel=1e-13, limit=200
    )
    return val


def _sqrt_branch(z, a, b):
    # sqrt(z - a) * sqrt(z - b): analytic off [a, b] and ~ z at infinity
    return np.sqrt(z - a) * np.sqrt(z - b)


def _check_real_axis(z, lo, hi, name):
    z_arr = np.atleast_1d(z)
    bad = (z_arr.imag == 0) & (z_arr.real >= lo) & (z_arr.real <= hi)
    if np.any(bad):
        raise BranchError(f"{name} is undefined on the real axis inside [{lo}, {hi}]")
    if np.any(z_arr.imag < 0):
        raise InvalidParameterError("spectral parameter must have nonnegative imaginary part")


def mp_stieltjes(z, phi):
    """Stieltjes transform ``m_phi(z)`` of the Marchenko-Pastur law.

    Uses the closed form with the branch ``sqrt(z - gamma_-) sqrt(z - gamma_+)``,
    followed by one Newton step on ``z~ m^2 + z^ m + 1 = 0``.  For real ``z``
    outside the support the value is the limit from the upper half-plane.
    """
    phi = _phi_value(phi)
    z = _z_value(z)
    lo, hi = mp_edges(phi)
    _check_real_axis(z, lo, hi, "m_phi")
    if np.any(np.atleast_1d(z) == 0):
        raise SingularError("m_phi is evaluated at z = 0")
    sp = math.sqrt(phi)
    num = sp - 1.0 / sp - z + _sqrt_branch(z, lo, hi)
    m = num / (2.0 / sp * z)
    zt = z / sp
    zh = z - sp + 1.0 / sp
    f = zt * m * m + zh * m + 1.0
    df = 2.0 * zt * m + zh
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(df != 0, f / df, 0.0)
    m = m - step
    if np.ndim(m) == 0:
        m = complex(m)
        if z.imag > 0 and m.imag <= 0:
            m = 1.0 / (zt * m)
        return m
    # the roots multiply to 1 / z~, so 1 / (z~ m) is the other one
    flip = (z.imag > 0) & (m.imag <= 0)
    m = np.where(flip, 1.0 / (zt * m), m)
    return m


def mp_stieltjes_dual(z, phi):
    """Stieltjes transform of the dual law ``m_{1/phi}(z)``."""
    phi = _phi_value(phi)
    z = _z_value(z)
    if np.any(np.atleast_1d(z) == 0):
        raise InvalidParameterError("dual transform requires z != 0")
    return (mp_stieltjes(z, phi) + (1.0 - phi) / z) / phi


def sc_density(x):
    """Semicircle density ``sqrt(4 - x^2)_+ / (2 pi)``."""
    x = np.asarray(x, dtype=float)
    out = np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2 * math.pi)
    return float(out) if out.ndim == 0 else out


def sc_stieltjes(z):
    """Stieltjes transform of the semicircle law, ``(-z + sqrt(z^2 - 4)) / 2``."""
    z = _z_value(z)
    _check_real_axis(z, -2.0, 2.0, "m_sc")
    m = (-z + _sqrt_branch(z, -2.0, 2.0)) / 2.0
    # one Newton step on m^2 + z m + 1 = 0
    m = m - (m * m + z * m + 1.0) / (2.0 * m + z)
    return complex(m) if np.ndim(m) == 0 else m


@dataclass(frozen=True)
class DomainSpec:
    """Spectral domain used by the local laws.

    ``kind`` is one of ``"S"``, ``"S_tilde"`` (sample covariance, bulk and
    outside), ``"S_W"``, ``"S_tilde_W"`` (Wigner, bulk and outside).  ``K`` is
    ``min(M, N)`` for the covariance domains and ``N`` for the Wigner ones.
    """

    omega: float
    K: int
    kind: str = "S"
    phi: float = 1.0

    def __post_init__(self):
        if not 0 < self.omega < 1:
            raise InvalidParameterError("omega must lie in (0, 1)")
        if self.K <= 0:
            raise InvalidParameterError("K must be positive")
        if self.kind not in ("S", "S_tilde", "S_W", "S_tilde_W"):
            raise InvalidParameterError(f"unknown domain kind {self.kind!r}")

    def contains(self, z, include_real_axis: bool = False) -> bool:
        """Membership predicate.

        ``include_real_axis`` admits ``eta = 0`` for the outside domains.
        """
        z = _z_value(z)
        E, eta = z.real, z.imag
        w, K = self.omega, self.K
        if self.kind == "S":
            return bool(
                kappa(E, self.phi) <= 1 / w and K ** (-1 + w) <= eta <= 1 / w and abs(z) >= w
            )
        if self.kind == "S_tilde":
            lo, hi = mp_edges(self.phi)
            eta_ok = (0 <= eta if include_real_axis else 0 < eta) and eta <= 1 / w
            return bool(
                not (lo <= E <= hi)
                and K ** (-2 / 3 + w) <= kappa(E, self.phi) <= 1 / w
                and abs(z) >= w
                and eta_ok
            )
        if self.kind == "S_W":
            return bool(abs(E) <= 1 / w and K ** (-1 + w) <= eta <= 1 / w)
        eta_ok = (0 <= eta if include_real_axis else 0 < eta) and eta <= 1 / w
        return bool(2 + K ** (-2 / 3 + w) <= abs(E) <= 1 / w and eta_ok)


@dataclass(frozen=True)
class LawEvaluation:
    m: complex
    im_m: float
    kappa: float
    psi: float
    edges: tuple[float, float]


@dataclass(frozen=True)
class RescaledParams:
    z_tilde: complex
    z_hat: complex
    m_tilde: complex


def psi_from_im(im_m, N, eta):
    """``sqrt(im_m / (N eta)) + 1 / (N eta)``."""
    Neta = N * np.asarray(eta, dtype=float)
    out = np.sqrt(np.asarray(im_m, dtype=float) / Neta) + 1.0 / Neta
    return float(out) if out.ndim == 0 else out


def control_psi(z, phi, N: int, domain: DomainSpec | None = None):
    """Control parameter ``Psi(z)``; raises if ``z`` lies outside ``domain``."""
    zc = _z_value(z)
    if domain is not None:
        for w in np.atleast_1d(zc):
            if not domain.contains(w):
                raise DomainError(f"z = {w} lies outside the domain {domain.kind}")
    if np.any(np.atleast_1d(zc).imag <= 0):
        raise DomainError("control parameter requires eta > 0")
    m = mp_stieltjes(zc, phi)
    return psi_from_im(np.imag(m), N, np.imag(zc))


def evaluate_law(z, phi, N: int) -> LawEvaluation:
    zc = complex(_z_value(z))
    m = mp_stieltjes(zc, phi)
    return LawEvaluation(
        m=m,
        im_m=m.imag,
        kappa=kappa(zc.real, phi),
        psi=psi_from_im(m.imag, N, zc.imag),
        edges=mp_edges(phi),
    )


def rescaled_params(z, phi) -> RescaledParams:
    phi = _phi_value(phi)
    zc = complex(_z_value(z))
    sp = math.sqrt(phi)
    m = mp_stieltjes(zc, phi)
    return RescaledParams(z_tilde=zc / sp, z_hat=zc - sp + 1 / sp, m_tilde=(m + (1 - phi) / zc) / sp)


def stability_operator(u, z, phi):
    """``D(u)(z) = 1/u + z~ u + z^``."""
    phi = _phi_value(phi)
    zc = _z_value(z)
    if np.any(np.atleast_1d(u) == 0):
        raise SingularError("stability operator is undefined at u = 0")
    sp = math.sqrt(phi)
    return 1.0 / u + zc / sp * u + (zc - sp + 1 / sp)


def stability_roots(z, phi, r=0.0):
    """Both solutions ``u`` of ``D(u)(z) = r``.

    The first root is the one continuing ``m_phi`` when ``r = 0``.
    """
    phi = _phi_value(phi)
    zc = complex(_z_value(z))
    sp = math.sqrt(phi)
    zt, zh = zc / sp, zc - sp + 1 / sp
    c = 1 + r / sp
    root = np.sqrt(complex(c))
    lam_m = sp + 1 / sp + r - 2 * root
    lam_p = sp + 1 / sp + r + 2 * root
    disc = np.sqrt(zc - lam_m) * np.sqrt(zc - lam_p)
    u1 = (r - zh + disc) / (2 * zt)
    u2 = (r - zh - disc) / (2 * zt)
    return complex(u1), complex(u2)


def lattice_L(z, spacing: float | None = None, N: int | None = None) -> list[complex]:
    """Vertical lattice above ``z`` used in the stability argument.

    Returns ``z`` followed by the points ``E + i k spacing`` with
    ``Im z < k spacing <= 1``, ordered by increasing imaginary part.
    """
    zc = complex(_z_value(z))
    if spacing is None:
        if N is None:
            raise InvalidParameterError("either spacing or N is required")
        spacing = max(float(N) ** -5, 1e-6)
    if not spacing > 0:
        raise InvalidParameterError("lattice spacing must be positive")
    pts = [zc]
    if zc.imag >= 1:
        return pts
    k0 = math.ceil(zc.imag / spacing - 1e-9)
    k1 = math.floor(1.0 / spacing + 1e-9)
    for k in range(k0, k1 + 1):
        t = k * spacing
        if abs(t - zc.imag) <= 1e-12 * max(1.0, t):
            continue
        pts.append(complex(zc.real, t))
    return pts


def classical_locations(N: int, M: int, alphas, tol: float = 1e-12) -> list[float]:
    """Classical eigenvalue locations ``gamma_alpha`` of the MP law.

    ``gamma_alpha`` solves ``int_{gamma_alpha}^inf rho_phi = alpha / N`` with
    ``phi = M / N``.  Roots are bracketed in ``[gamma_-, gamma_+]``.
    """
    phi = M / N
    K = min(M, N)
    lo, hi = mp_edges(phi)
    out = []
    for a in alphas:
        if not 1 <= a <= K:
            raise InvalidParameterError(f"alpha = {a} outside [1, {K}]")
        target = a / N
        total = min(phi, 1.0)
        if abs(target - total) <= 1e-15:
            out.append(lo)
            continue
        g = optimize.brentq(lambda x: mp_mass_above(x, phi) - target, lo, hi, xtol=tol, rtol=1e-15)
        out.append(g)
    return out


def _sc_mass_above(x):
    x = min(max(x, -2.0), 2.0)
    return 0.5 - x * math.sqrt(4 - x * x) / (4 * math.pi) - math.asin(x / 2) / math.pi


def sc_classical_locations(N: int, alphas, tol: float = 1e-12) -> list[float]:
    """Classical locations of the semicircle law, ``int_{gamma}^inf rho_sc = alpha / N``."""
    out = []
    for a in alphas:
        if not 1 <= a <= N:
            raise InvalidParameterError(f"alpha = {a} outside [1, {N}]")
        target = a / N
        if a == N:
            out.append(-2.0)
            continue
        out.append(optimize.brentq(lambda x: _sc_mass_above(x) - target, -2.0, 2.0, xtol=tol, rtol=1e-15))
    return out


def law_asymptotics_check(zs, phi, factor: float = 10.0) -> dict:
    """Check the two-sided bounds on ``m_phi`` over a grid.

    Verifies ``|m| ~ 1``, ``|1 - z~ m^2| ~ sqrt(kappa + eta)`` and the two-regime
    behaviour of ``Im m`` (``sqrt(kappa + eta)`` inside the spectrum,
    ``eta / sqrt(kappa + eta)`` outside), each within a factor ``factor``.
    """
    phi = _phi_value(phi)
    lo, hi = mp_edges(phi)
    zs = np.atleast_1d(np.asarray([_z_value(z) for z in np.atleast_1d(zs)], dtype=complex))
    m = np.atleast_1d(mp_stieltjes(zs, phi))
    E, eta = zs.real, zs.imag
    k = np.atleast_1d(kappa(E, phi))
    scale = np.sqrt(k + eta)
    inside = (E >= lo) & (E <= hi)
    im_ref = np.where(inside, scale, eta / scale)
    # 1 - z~ m^2 = m^2 D'(m) is the factor that vanishes at both edges
    zt = zs / math.sqrt(phi)
    checks = {
        "abs_m": np.abs(m),
        "one_minus_m2": np.abs(1 - zt * m * m) / scale,
        "im_m": m.imag / im_ref,
    }
    violations = []
    for name, vals in checks.items():
        bad = (vals < 1 / factor) | (vals > factor)
        for idx in np.flatnonzero(bad):
            violations.append({"check": name, "z": complex(zs[idx]), "ratio": float(vals[idx])})
    return {
        "n_points": int(zs.size),
        "violations": violations,
        "ratios": {name: (float(v.min()), float(v.max())) for name, v in checks.items()},
        "literal_one_minus_m2": (float(np.min(np.abs(1 - m * m) / scale)), float(np.max(np.abs(1 - m * m) / scale))),
        "ok": not violations,
    }
