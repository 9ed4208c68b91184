import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locallaw.ensembles import EnsembleSpec, sample_covariance
from locallaw.errors import InvalidParameterError
from locallaw.harness import (
    CSV_COLUMNS,
    FAMILIES,
    TrialRecord,
    check_stability_lemma,
    control_diagnostics,
    covariance_decomposition,
    estimate_domination,
    experiment_entrywise,
    experiment_fluctuation_averaging,
    experiment_isotropic,
    experiment_large_deviation,
    experiment_rigidity,
    experiment_stability,
    fit_scaling,
    run_trials,
    spec_at,
    vector_family,
    write_csv,
    z_fluctuations,
    z_fluctuations_direct,
)
from locallaw.laws import lattice_L, mp_stieltjes


def _square(x):
    return x * x


# domination estimator


def _triples(rng, Ns, n, scale):
    return {N: np.column_stack([scale(N) * rng.exponential(size=n), np.ones(n)]) for N in Ns}


def test_domination_zero_is_consistent():
    Ns = (64, 256, 1024)
    v = estimate_domination({N: np.zeros((50, 2)) + [0, 1] for N in Ns})
    assert v.consistent


def test_domination_equal_is_consistent():
    rng = np.random.default_rng(0)
    v = estimate_domination(_triples(rng, (64, 256, 1024), 50, lambda N: 1.0), eps_grid=(0.25, 0.5))
    assert v.consistent
    assert set(v.per_eps) == {0.25, 0.5}


def test_domination_power_gap_is_inconsistent():
    rng = np.random.default_rng(1)
    v = estimate_domination(_triples(rng, (64, 256, 1024), 50, lambda N: N**0.5))
    assert not v.consistent
    assert v.fractions[0.25][-1] > 0.5


def test_domination_increasing_fraction_is_inconsistent():
    # exceedance fraction climbs from 0 to 1/2 with N
    Ns = (64, 256, 1024)
    samples = {}
    for k, N in enumerate(Ns):
        xi = np.zeros(100)
        xi[: 25 * k] = 10 * N
        samples[N] = np.column_stack([xi, np.ones(100)])
    assert not estimate_domination(samples).consistent


def test_domination_errors():
    good = np.zeros((30, 2))
    with pytest.raises(InvalidParameterError):
        estimate_domination({10: good, 20: good})
    with pytest.raises(InvalidParameterError):
        estimate_domination({10: good, 20: good, 40: good[:5]})
    with pytest.raises(InvalidParameterError):
        estimate_domination({10: good, 20: good, 40: good}, eps_grid=(0.0,))
    bad = good.copy()
    bad[0, 0] = np.nan
    with pytest.raises(InvalidParameterError):
        estimate_domination({10: good, 20: good, 40: bad})


def test_domination_as_dict_is_json():
    v = estimate_domination({N: np.zeros((20, 2)) + [0, 1] for N in (8, 16, 32)})
    json.dumps(v.as_dict())


# scaling fits


@settings(max_examples=50, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(0.1, 10.0))
def test_fit_exact_power_law(exponent, C):
    x = np.array([64.0, 128, 256, 512, 1024])
    fit = fit_scaling(x, C * x**exponent)
    assert fit.exponent == pytest.approx(exponent, abs=1e-9)
    assert fit.intercept == pytest.approx(math.log(C), abs=1e-9)
    assert fit.within(exponent, 1e-6)


def test_fit_errors():
    with pytest.raises(InvalidParameterError):
        fit_scaling([1, 2, 3], [1, 2, 3])
    with pytest.raises(InvalidParameterError):
        fit_scaling([1, 2, 3, 4], [1, 2, -3, 4])
    with pytest.raises(InvalidParameterError):
        fit_scaling([1, 2, 3, 3], [1, 2, 3, 4])


# records


def test_record_rows_and_csv(tmp_path):
    rec = TrialRecord("demo", 3, 1, 10, 20, [1 + 1j, 2 + 1j], {"a": np.array([1.0, 2.0]), "b": 5.0})
    rows = list(rec.rows())
    assert len(rows) == 3
    assert all(len(r) == len(CSV_COLUMNS) for r in rows)
    assert rec.phi == 2.0
    n = write_csv([rec], tmp_path / "r.csv")
    assert n == 3
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    with pytest.raises(InvalidParameterError):
        TrialRecord("demo", 0, 0, 1, 1, metrics={"a": float("nan")})


def test_run_trials_order():
    assert run_trials(_square, range(5)) == [0, 1, 4, 9, 16]
    assert run_trials(_square, range(5), jobs=2) == [0, 1, 4, 9, 16]


# diagnostics


@pytest.fixture(scope="module")
def factor():
    return sample_covariance(EnsembleSpec(M=80, N=60, entry="complex-gaussian", seed=4))


def test_z_closed_form_matches_direct(factor):
    z = 1.7 + 0.05j
    closed = z_fluctuations(covariance_decomposition(factor), z, factor.shape[0])
    mus = [0, 7, 59]
    direct = z_fluctuations_direct(factor, z, mus)
    assert np.max(np.abs(closed[mus] - direct)) < 1e-10


@pytest.mark.parametrize("z", [0.5 + 0.01j, 1.7 + 0.05j, 3.0 + 1j])
def test_diagnostic_invariants(factor, z):
    d = control_diagnostics(factor, z)
    assert d.Lambda >= d.Lambda_o
    assert d.Lambda >= d.Lambda_d
    assert d.Theta <= d.Lambda_d + 1e-12
    assert d.trace_defect < 1e-9
    assert d.Psi_Theta >= math.sqrt(mp_stieltjes(z, 80 / 60).imag / (60 * z.imag)) - 1e-15
    m = d.as_metrics()
    assert all(np.isfinite(v) for v in m.values())
    with pytest.raises(InvalidParameterError):
        control_diagnostics(factor, 1.0 + 0j)


@pytest.mark.parametrize("family", FAMILIES)
def test_vector_families(family):
    V, W = vector_family(family, 50, 6, seed=2)
    assert np.allclose(np.linalg.norm(V, axis=1), 1)
    assert np.allclose(np.linalg.norm(W, axis=1), 1)
    assert np.array_equal(V[0], W[0])
    assert not np.array_equal(V[1], W[1])
    V2, _ = vector_family(family, 50, 6, seed=2)
    assert np.array_equal(V, V2)
    with pytest.raises(InvalidParameterError):
        vector_family("dense", 50, 2)


# stability


def test_stability_exact_law_has_zero_margin():
    z = 2 + 0.01j
    L = np.array(lattice_L(z, spacing=0.01))
    u = np.array([mp_stieltjes(w, 1.0) for w in L])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = check_stability_lemma(u, L, 1.0, 100)
    assert rep.deviation < 1e-12
    assert rep.ok
    assert rep.clipped


def test_stability_perturbed():
    z = 2 + 0.01j
    L = np.array(lattice_L(z, spacing=0.01))
    u = np.array([mp_stieltjes(w, 1.0) for w in L]) + 1e-3
    rep = check_stability_lemma(u, L, 1.0, 100)
    assert rep.ok
    assert rep.delta > 0
    with pytest.raises(InvalidParameterError):
        check_stability_lemma(u[:-1], L, 1.0, 100)


def test_stability_experiment():
    out = experiment_stability(EnsembleSpec(M=100, N=100, seed=1), [2 + 0.05j], trials=3, spacing=0.01)
    assert out.summary["fraction_ok"][0] == 1.0


# experiments at small scale


def test_spec_at_keeps_phi():
    s = spec_at(EnsembleSpec(M=200, N=100), 64)
    assert (s.M, s.N) == (128, 64)


def test_large_deviation_verdicts():
    for kind in ("linear", "bilinear", "offdiag"):
        out = experiment_large_deviation(kind, sizes=(50, 100, 200), trials=40, seed=2)
        assert out.verdicts["domination"].consistent, kind
    with pytest.raises(InvalidParameterError):
        experiment_large_deviation("cubic")


def test_rigidity_small():
    spec = EnsembleSpec(M=64, N=64, entry="real-gaussian", seed=3)
    out = experiment_rigidity(spec, alphas=(1, 0.5, -1), Ns=(32, 64, 128, 256), trials=20)
    assert out.summary["all_sorted"]
    assert out.fits["top"].exponent < 0
    assert out.verdicts["domination"].consistent


def test_isotropic_small_and_deterministic():
    spec = EnsembleSpec(M=64, N=64, entry="real-gaussian", seed=5)
    zs = [2 + 0.1j, 1 + 0.2j]
    a = experiment_isotropic(spec, zs, Ns=(32, 64, 128), trials=20)
    b = experiment_isotropic(spec, zs, Ns=(32, 64, 128), trials=20)
    assert json.dumps(a.as_dict(), sort_keys=True) == json.dumps(b.as_dict(), sort_keys=True)
    assert a.summary["max_trace_defect"] < 1e-9
    assert a.verdicts["domination"].consistent


def test_entrywise_small():
    spec = EnsembleSpec(M=64, N=64, entry="complex-gaussian", seed=6)
    out = experiment_entrywise(spec, [2 + 0.1j], Ns=(32, 64), trials=5)
    assert out.records


def test_fluctuation_averaging_small():
    spec = EnsembleSpec(M=128, N=128, entry="complex-gaussian", seed=7)
    out = experiment_fluctuation_averaging(spec, trials=4, n_sub=8, n_check=1)
    assert out.summary["route_defect"] < 1e-8
    with pytest.raises(InvalidParameterError):
        experiment_fluctuation_averaging(spec, etas=[1.0, 2.0, 3.0, 4.0])
