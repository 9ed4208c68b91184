import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locallaw.errors import BranchError, DomainError, InvalidParameterError, SingularError
from locallaw.laws import (
    AspectRatio,
    DomainSpec,
    classical_locations,
    control_psi,
    kappa,
    lattice_L,
    law_asymptotics_check,
    mp_density,
    mp_edges,
    mp_mass_above,
    mp_stieltjes,
    mp_stieltjes_dual,
    psi_from_im,
    sc_classical_locations,
    sc_stieltjes,
    stability_operator,
    stability_roots,
)

phis = st.floats(min_value=0.1, max_value=10.0)
energies = st.floats(min_value=-2.0, max_value=16.0)
etas = st.floats(min_value=1e-3, max_value=10.0)


def stieltjes_quad(z, phi):
    """Independent oracle: integrate the density against 1/(x - z) with mpmath."""
    mpmath.mp.dps = 30
    sp = mpmath.sqrt(phi)
    lo = max(sp + 1 / sp - 2, 0)
    hi = sp + 1 / sp + 2
    z = mpmath.mpc(z)

    def f(x):
        return sp / (2 * mpmath.pi) * mpmath.sqrt((x - lo) * (hi - x)) / x / (x - z)

    # split near Re z so the near-pole peak is resolved
    E, eta = z.real, z.imag
    pts = sorted({lo, hi} | {p for p in (E - 10 * eta, E, E + 10 * eta) if lo < p < hi})
    val = mpmath.quad(f, pts)
    if phi < 1:
        val += (1 - phi) / (-z)
    return complex(val)


def quadratic_root(z, phi):
    """Root of z~ m^2 + z^ m + 1 = 0 with Im m > 0, from numpy."""
    sp = math.sqrt(phi)
    r = np.roots([z / sp, z - sp + 1 / sp, 1.0])
    return r[np.argmax(r.imag)]


@pytest.mark.parametrize("phi", [0.1, 0.5, 1.0, 2.0, 10.0])
@pytest.mark.parametrize("z", [0.5 + 0.1j, 2 + 1j, 4.1 + 0.01j, -1 + 0.5j, 10 + 3j])
def test_stieltjes_matches_quadrature(phi, z):
    assert abs(mp_stieltjes(z, phi) - stieltjes_quad(z, phi)) < 1e-10


def test_m1_at_two():
    assert abs(mp_stieltjes(2 + 1e-12j, 1.0) - (-0.5 + 0.5j)) < 1e-9


def test_edges():
    assert mp_edges(1.0) == (0.0, 4.0)
    lo, hi = mp_edges(4.0)
    assert lo == pytest.approx(0.5)
    assert hi == pytest.approx(4.5)
    assert mp_edges(AspectRatio(8, 2)) == mp_edges(4.0)
    assert kappa(1.0, 1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("phi", [0.25, 0.5, 1.0, 2.0, 7.0])
def test_density_mass(phi):
    lo, hi = mp_edges(phi)
    mpmath.mp.dps = 20
    sp = math.sqrt(phi)
    total = mpmath.quad(lambda x: sp / (2 * mpmath.pi) * mpmath.sqrt((x - lo) * (hi - x)) / x, [lo, hi])
    _, atom = mp_density(1.0, phi)
    assert float(total) + atom == pytest.approx(1.0, abs=1e-12)
    assert mp_mass_above(lo, phi) == pytest.approx(float(total), abs=1e-12)
    assert mp_mass_above(hi, phi) == 0.0


@settings(max_examples=200, deadline=None)
@given(phis, energies, etas)
def test_solves_quadratic_in_upper_half_plane(phi, E, eta):
    z = complex(E, eta)
    m = mp_stieltjes(z, phi)
    assert m.imag > 0
    assert abs(m - quadratic_root(z, phi)) < 1e-9 * max(1.0, abs(m))
    assert abs(stability_operator(m, z, phi)) < 1e-9 * max(1.0, 1 / abs(m), abs(z * m))


@settings(max_examples=200, deadline=None)
@given(phis, energies, etas)
def test_duality(phi, E, eta):
    z = complex(E, eta)
    direct = mp_stieltjes(z, 1.0 / phi)
    assert abs(mp_stieltjes_dual(z, phi) - direct) < 1e-9 * max(1.0, abs(direct))


@settings(max_examples=100, deadline=None)
@given(phis, energies, etas)
def test_vectorized_matches_scalar(phi, E, eta):
    zs = np.array([complex(E, eta), complex(E + 1, eta / 2)])
    vec = mp_stieltjes(zs, phi)
    assert np.allclose(vec, [mp_stieltjes(z, phi) for z in zs], rtol=1e-14, atol=0)


def test_real_axis_outside_support():
    phi = 2.0
    lo, hi = mp_edges(phi)
    for E in (hi + 0.5, lo / 2):
        m = mp_stieltjes(E, phi)
        near = mp_stieltjes(complex(E, 1e-12), phi)
        assert abs(m - near) < 1e-9
        assert abs(m.imag) < 1e-9


def test_errors():
    with pytest.raises(BranchError):
        mp_stieltjes(2.0, 1.0)
    with pytest.raises(SingularError):
        mp_stieltjes(0.0, 2.0)
    with pytest.raises(InvalidParameterError):
        mp_stieltjes(1 - 1j, 1.0)
    with pytest.raises(InvalidParameterError):
        mp_edges(-1.0)
    with pytest.raises(SingularError):
        stability_operator(0.0, 1j, 1.0)
    with pytest.raises(DomainError):
        control_psi(2.0 + 0j, 1.0, 100)


def test_semicircle():
    mpmath.mp.dps = 20
    for z in (0.3 + 0.2j, 2.5 + 0.01j, -1 + 1j):
        ref = mpmath.quad(lambda x: mpmath.sqrt(4 - x * x) / (2 * mpmath.pi) / (x - z), [-2, 0, 2])
        assert abs(sc_stieltjes(z) - complex(ref)) < 1e-10
    assert sc_classical_locations(100, [50])[0] == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(BranchError):
        sc_stieltjes(1.0)


def test_stability_roots():
    z, phi = 1.5 + 0.3j, 2.0
    u1, u2 = stability_roots(z, phi)
    assert abs(u1 - mp_stieltjes(z, phi)) < 1e-12
    assert abs(stability_operator(u2, z, phi)) < 1e-12
    for r in (0.01, -0.02 + 0.01j):
        for u in stability_roots(z, phi, r):
            assert abs(stability_operator(u, z, phi) - r) < 1e-10


def test_psi():
    assert psi_from_im(0.25, 100, 0.01) == pytest.approx(math.sqrt(0.25) + 1.0)
    z = 2 + 0.1j
    assert control_psi(z, 1.0, 500) == pytest.approx(psi_from_im(mp_stieltjes(z, 1.0).imag, 500, 0.1))


def test_domain():
    d = DomainSpec(omega=0.1, K=1000, kind="S", phi=1.0)
    assert d.contains(2 + 0.1j)
    assert not d.contains(2 + 1e-4j)
    assert not d.contains(0.01 + 0.01j)
    out = DomainSpec(omega=0.1, K=1000, kind="S_tilde", phi=1.0)
    assert out.contains(4.5 + 0.0j, include_real_axis=True)
    assert not out.contains(4.5 + 0.0j)
    assert not out.contains(3.0 + 0.1j)
    with pytest.raises(InvalidParameterError):
        DomainSpec(omega=1.5, K=10)
    with pytest.raises(DomainError):
        control_psi(2 + 1e-5j, 1.0, 1000, domain=d)


def test_classical_locations():
    N = M = 200
    g = classical_locations(N, M, [1, 100, 200])
    assert g[0] > g[1] > g[2]
    assert g[2] == 0.0
    assert mp_mass_above(g[1], 1.0) == pytest.approx(0.5, abs=1e-10)
    g2 = classical_locations(100, 200, [100])
    assert g2[0] == pytest.approx(mp_edges(2.0)[0])
    with pytest.raises(InvalidParameterError):
        classical_locations(10, 10, [11])


def test_lattice():
    pts = lattice_L(1 + 0.5j, spacing=0.1)
    assert pts[0] == 1 + 0.5j
    assert np.allclose([p.imag for p in pts[1:]], [0.6, 0.7, 0.8, 0.9, 1.0])
    assert lattice_L(1 + 2j, spacing=0.1) == [1 + 2j]
    with pytest.raises(InvalidParameterError):
        lattice_L(1 + 0.5j)


@pytest.mark.parametrize("phi", [1.0, 2.0, 5.0])
def test_asymptotics(phi):
    lo, hi = mp_edges(phi)
    Es = np.linspace(max(lo - 0.3, 0.3), hi + 0.5, 20)
    zs = [complex(E, eta) for E in Es for eta in (1e-3, 0.1, 1.0)]
    rep = law_asymptotics_check(zs, phi)
    assert rep["ok"], rep["violations"]
    # the untwisted 1 - m^2 does not vanish at the MP edges
    edge = law_asymptotics_check([complex(hi, 1e-6)], phi)
    assert edge["literal_one_minus_m2"][0] > 100
