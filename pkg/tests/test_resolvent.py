import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locallaw.errors import InvalidParameterError, SingularError
from locallaw.resolvent import (
    CovarianceResolvents,
    MinorSpec,
    check_identities_G,
    check_identities_R,
    check_interlacing,
    check_trace_identities,
    check_ward,
    decompose,
    identity_scale,
    minor_resolvent,
    quadratic_form,
    quadratic_forms,
    spectral_sum,
    trace_resolvent,
)


def random_factor(M, N, seed):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))) / math.sqrt(2) * (M * N) ** -0.25


def dense_inverse(A, z):
    return np.linalg.inv(A - z * np.eye(A.shape[0]))


@pytest.mark.parametrize("z", [1 + 0.5j, 0.3 + 1e-3j, -1 + 2j])
def test_resolvent_matches_inverse(z):
    X = random_factor(12, 9, 0)
    A = X.conj().T @ X
    dec = decompose(A)
    Rz = dense_inverse(A, z)
    assert np.allclose(dec.resolvent(z), Rz, atol=1e-9 * np.abs(Rz).max())
    assert np.allclose(dec.resolvent_diag(z), np.diag(Rz), atol=1e-9 * np.abs(Rz).max())
    assert abs(trace_resolvent(dec, z) - np.trace(Rz)) < 1e-9 * abs(np.trace(Rz))


def test_quadratic_forms():
    X = random_factor(10, 10, 1)
    A = X.conj().T @ X
    dec = decompose(A)
    rng = np.random.default_rng(2)
    V = rng.standard_normal((3, 10)) + 1j * rng.standard_normal((3, 10))
    W = rng.standard_normal((3, 10))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    zs = np.array([1 + 0.1j, 2 + 0.01j])
    P = quadratic_forms(dec, zs, V, W)
    for p in range(3):
        for j, z in enumerate(zs):
            ref = V[p].conj() @ dense_inverse(A, z) @ W[p]
            assert abs(P[p, j] - ref) < 1e-9 * abs(ref)
            assert abs(quadratic_form(dec, z, V[p], W[p]) - ref) < 1e-9 * abs(ref)
    with pytest.raises(InvalidParameterError):
        quadratic_form(dec, 1j, 2 * V[0], W[0])


def test_spectral_sum():
    out = spectral_sum([0.0, 1.0], [[1.0, 2.0]], [1j])
    assert out[0, 0] == pytest.approx(1 / -1j + 2 / (1 - 1j))


def test_decompose_errors():
    with pytest.raises(InvalidParameterError):
        decompose(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(InvalidParameterError):
        decompose(np.ones((2, 3)))
    dec = decompose(np.diag([1.0, 2.0]))
    with pytest.raises(SingularError):
        dec.resolvent(2.0)


def test_minor_convention():
    X = random_factor(6, 5, 3)
    z = 1 + 0.5j
    G, R = minor_resolvent(X, MinorSpec({1}, {2}), z)
    assert G[1, 1] == pytest.approx(-1 / z)
    assert R[2, 2] == pytest.approx(-1 / z)
    assert abs(G[1, 0]) < 1e-14
    res = CovarianceResolvents(X)
    with pytest.raises(InvalidParameterError):
        res.G(z, rows=(7,))


def test_g_from_r():
    X = random_factor(9, 6, 4)
    z = 0.8 + 0.2j
    res = CovarianceResolvents(X)
    G = res.G(z)
    R = res.R(z)
    assert np.allclose(G, (X @ R @ X.conj().T - np.eye(9)) / z, atol=1e-10)


dims = st.integers(4, 12)
spectral = st.tuples(st.floats(-1.0, 4.0), st.floats(0.05, 3.0))


@settings(max_examples=60, deadline=None)
@given(dims, dims, st.integers(0, 10**6), spectral)
def test_identities_hold(M, N, seed, zpair):
    X = random_factor(M, N, seed)
    z = complex(*zpair)
    tol = 1e-9 * identity_scale(z)
    cache = CovarianceResolvents(X)
    for r in check_identities_G(X, z, [0], 1, 2, cache=cache).values():
        assert r < tol
    for r in check_identities_G(X, z, [], 1, 1, cache=cache).values():
        assert r < tol
    for r in check_identities_R(X, z, [2], 0, 1, cache=cache).values():
        assert r < tol
    for r in check_trace_identities(X, z, [0], [1], cache=cache).values():
        assert r < tol
    assert check_ward(X, z, [1], 0, cache=cache) < tol


@settings(max_examples=40, deadline=None)
@given(dims, dims, st.integers(0, 10**6), spectral)
def test_interlacing(M, N, seed, zpair):
    X = random_factor(M, N, seed)
    z = complex(*zpair)
    out = check_interlacing(X, z, T=[0], U=[0, 1])
    # zeroing a column moves at most two eigenvalues of X* X, a row is rank one
    assert out["cols"] <= 2 * math.pi + 1e-9
    assert out["rows"] <= 2 * math.pi + 1e-9


def test_identity_argument_errors():
    X = random_factor(5, 5, 0)
    with pytest.raises(InvalidParameterError):
        check_identities_G(X, 1j, [1], 1, 2)
    with pytest.raises(InvalidParameterError):
        check_ward(X, 1.0 + 0j, [], 0)
    assert identity_scale(0.1j) == pytest.approx(100.0)
