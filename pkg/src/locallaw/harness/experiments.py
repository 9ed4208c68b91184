"""Monte Carlo experiments for the local laws, rigidity, delocalization and related bounds."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from ..ensembles import EnsembleSpec, sample_covariance, substream
from ..errors import InvalidParameterError
from ..laws import (
    DomainSpec,
    classical_locations,
    control_psi,
    kappa,
    lattice_L,
    mp_edges,
    mp_stieltjes,
    stability_operator,
)
from ..resolvent import quadratic_forms
from .diagnostics import control_diagnostics, covariance_decomposition, z_fluctuations, z_fluctuations_direct
from .stats import TrialRecord, estimate_domination, fit_scaling, run_trials

__all__ = [
    "FAMILIES",
    "ExperimentResult",
    "StabilityReport",
    "spec_at",
    "vector_family",
    "experiment_isotropic",
    "experiment_outside",
    "experiment_entrywise",
    "experiment_rigidity",
    "experiment_delocalization",
    "experiment_fluctuation_averaging",
    "experiment_large_deviation",
    "check_stability_lemma",
    "experiment_stability",
]

FAMILIES = ("coordinate", "random", "sparse", "flat")
# stream keys kept apart from the matrix streams (trial, 1) and (trial, 2)
_VECTOR_KEY = 1_000_003
_SUBSET_KEY = 1_000_033
_LDE_KEY = 1_000_037


@dataclass
class ExperimentResult:
    """Records plus reduced statistics of one experiment run."""

    experiment: str
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "summary": _jsonable(self.summary),
            "fits": {k: v.as_dict() for k, v in self.fits.items()},
            "verdicts": {k: v.as_dict() for k, v in self.verdicts.items()},
            "skipped": [_jsonable(s) for s in self.skipped],
            "n_records": len(self.records),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def spec_at(spec: EnsembleSpec, N: int) -> EnsembleSpec:
    """Copy of ``spec`` with ``N`` replaced and ``M`` rescaled to keep ``phi``."""
    M = max(1, int(round(spec.phi * N)))
    return replace(spec, N=int(N), M=M, profile=None)


def _check_covariance(spec):
    if spec.kind != "sample-covariance":
        raise InvalidParameterError("this experiment needs a sample covariance ensemble")


def vector_family(name: str, dim: int, n_pairs: int, seed: int = 0) -> tuple:
    """Deterministic unit vector pairs ``(V[p], W[p])`` of one family.

    Even ``p`` gives ``v = w``; odd ``p`` gives a second, different vector.
    The vectors come from their own random stream, independent of the matrix.
    """
    if name not in FAMILIES:
        raise InvalidParameterError(f"unknown vector family {name!r}; valid: {FAMILIES}")
    if n_pairs < 1 or dim < 2:
        raise InvalidParameterError("need n_pairs >= 1 and dim >= 2")
    rng = substream(seed, _VECTOR_KEY, FAMILIES.index(name), dim)
    V = np.zeros((n_pairs, dim))
    W = np.zeros((n_pairs, dim))
    for p in range(n_pairs):
        if name == "coordinate":
            i = int(rng.integers(dim))
            j = i if p % 2 == 0 else int((i + 1 + rng.integers(dim - 1)) % dim)
            V[p, i] = 1.0
            W[p, j] = 1.0
            continue
        if name == "random":
            v = rng.standard_normal(dim)
            w = v if p % 2 == 0 else rng.standard_normal(dim)
        elif name == "sparse":
            k = min(4, dim)
            v = np.zeros(dim)
            v[rng.choice(dim, k, replace=False)] = rng.choice([-1.0, 1.0], k)
            w = v
            if p % 2 == 1:
                w = np.zeros(dim)
                w[rng.choice(dim, k, replace=False)] = rng.choice([-1.0, 1.0], k)
        else:
            v = np.ones(dim)
            w = v if p % 2 == 0 else np.where(np.arange(dim) % 2 == 0, 1.0, -1.0)
        V[p] = v / np.linalg.norm(v)
        W[p] = w / np.linalg.norm(w)
    return V, W


def _families(families, dim, n_pairs, seed):
    V, W, labels = [], [], []
    for f in families:
        v, w = vector_family(f, dim, n_pairs, seed)
        V.append(v)
        W.append(w)
        labels += [f] * n_pairs
    return np.vstack(V), np.vstack(W), np.array(labels)


def _quadratic_trial(args):
    experiment, spec, trial, zs, V, W, m, psi = args
    X = sample_covariance(spec, trial)
    dec = covariance_decomposition(X)
    qf = quadratic_forms(dec, zs, V, W)
    inner = np.sum(V.conj() * W, axis=1)
    err = np.abs(qf - inner[:, None] * m[None, :]).T
    inv = 1.0 / (dec.eigenvalues[:, None] - zs[None, :])
    tr_eig = inv.sum(axis=0)
    tr_diag = (np.abs(dec.eigenvectors) ** 2 @ inv).sum(axis=0)
    metrics = {"error": err, "trace_defect": np.abs(tr_eig - tr_diag)}
    if psi is not None:
        metrics["ratio"] = err / psi[:, None]
    return TrialRecord(experiment, spec.seed, trial, spec.N, spec.M, zs, metrics)


def experiment_isotropic(
    spec: EnsembleSpec,
    zs,
    Ns=None,
    trials: int = 50,
    families=FAMILIES,
    n_pairs: int = 8,
    omega: float = 0.1,
    eps_grid=(0.25,),
    fit_index: int = 0,
    jobs: int = 1,
) -> ExperimentResult:
    """Isotropic law inside the bulk domain.

    For every ``N`` and trial, measures ``|<v, R w> - m_phi <v, w>|`` and its
    ratio to ``Psi`` for each grid point and vector pair.  Grid points outside
    the domain are skipped with a warning.
    """
    _check_covariance(spec)
    Ns = tuple(Ns) if Ns is not None else (spec.N,)
    zs_all = np.atleast_1d(np.asarray(zs, dtype=complex))
    out = ExperimentResult("isotropic")
    samples = {}
    per_N = {}
    kept_by_N = {}
    for N in Ns:
        sN = spec_at(spec, N)
        dom = DomainSpec(omega, min(sN.M, sN.N), "S", sN.phi)
        keep = np.array([dom.contains(z) for z in zs_all])
        for z in zs_all[~keep]:
            warnings.warn(f"z = {z} lies outside S for N = {N}; skipped", stacklevel=2)
            out.skipped.append({"N": N, "z": z})
        zs_N = zs_all[keep]
        kept_by_N[N] = keep
        if zs_N.size == 0:
            continue
        m = np.atleast_1d(mp_stieltjes(zs_N, sN.phi))
        psi = np.atleast_1d(control_psi(zs_N, sN.phi, N))
        V, W, labels = _families(families, N, n_pairs, spec.seed)
        tasks = [("isotropic", sN, t, zs_N, V, W, m, psi) for t in range(trials)]
        recs = run_trials(_quadratic_trial, tasks, jobs)
        out.records += recs
        err = np.stack([r.metrics["error"] for r in recs])  # (trial, z, pair)
        ratio = np.stack([r.metrics["ratio"] for r in recs])
        per_N[N] = (err, ratio, labels, psi, zs_N)
        samples[N] = np.column_stack([err.ravel(), np.broadcast_to(psi[None, :, None], err.shape).ravel()])
    summary = {"Ns": list(per_N), "median_ratio": {}, "median_ratio_by_family": {}, "max_trace_defect": 0.0}
    for N, (err, ratio, labels, psi, zs_N) in per_N.items():
        summary["median_ratio"][N] = float(np.median(ratio))
        summary["median_ratio_by_family"][N] = {f: float(np.median(ratio[:, :, labels == f])) for f in families}
    summary["max_trace_defect"] = max((float(np.max(r.metrics["trace_defect"])) for r in out.records), default=0.0)
    out.summary = summary
    if len(per_N) >= 3 and all(len(v) >= 20 for v in samples.values()):
        out.verdicts["domination"] = estimate_domination(samples, eps_grid)
    common = np.all(np.stack([kept_by_N[N] for N in per_N]), axis=0) if per_N else np.zeros(0, bool)
    if len(per_N) >= 4 and np.any(common):
        z_fit = zs_all[common][min(fit_index, int(np.sum(common)) - 1)]
        med, ps = [], []
        for N, (err, ratio, labels, psi, zs_N) in per_N.items():
            k = int(np.flatnonzero(zs_N == z_fit)[0])
            med.append(float(np.median(err[:, k, :])))
            ps.append(float(psi[k]))
        out.fits["median_error"] = fit_scaling(list(per_N), med)
        out.fits["psi"] = fit_scaling(list(per_N), ps)
        out.summary["fit_z"] = z_fit
    return out


def experiment_outside(
    spec: EnsembleSpec,
    kappas=(0.1, 0.2, 0.4, 0.8),
    Ns=(256, 512, 1024, 2048),
    trials: int = 20,
    eta: float = 0.0,
    edge: str = "upper",
    families=FAMILIES,
    n_pairs: int = 8,
    omega: float = 0.1,
    jobs: int = 1,
) -> ExperimentResult:
    """Isotropic law outside the spectrum, including the real axis.

    The error ``|<v, R w> - m_phi <v, w>|`` is compared with the reference
    scale ``(1 + 1/phi)^{-1} (kappa + eta)^{-1/4} K^{-1/2}``.  Fits: the median
    error against ``kappa + eta`` at the largest ``N``, and against ``K`` at
    each ``kappa``.
    """
    _check_covariance(spec)
    if edge not in ("upper", "lower"):
        raise InvalidParameterError("edge must be 'upper' or 'lower'")
    if eta < 0:
        raise InvalidParameterError("eta must be nonnegative")
    kappas = np.asarray(kappas, dtype=float)
    out = ExperimentResult("outside")
    med = {}
    used_k = {}
    for N in Ns:
        sN = spec_at(spec, N)
        K = min(sN.M, sN.N)
        lo, hi = mp_edges(sN.phi)
        E = hi + kappas if edge == "upper" else lo - kappas
        zs = E + 1j * eta
        dom = DomainSpec(omega, K, "S_tilde", sN.phi)
        keep = np.array([dom.contains(z, include_real_axis=True) for z in zs])
        for z in zs[~keep]:
            warnings.warn(f"z = {z} lies outside S_tilde for N = {N}; skipped", stacklevel=2)
            out.skipped.append({"N": N, "z": z})
        zs = zs[keep]
        if zs.size == 0:
            continue
        used_k[N] = kappas[keep]
        m = np.array([complex(mp_stieltjes(z, sN.phi)) for z in zs])
        V, W, _ = _families(families, N, n_pairs, spec.seed)
        tasks = [("outside", sN, t, zs, V, W, m, None) for t in range(trials)]
        recs = run_trials(_quadratic_trial, tasks, jobs)
        for r in recs:
            r.metrics["bound"] = (1 + 1 / sN.phi) ** -1 * (used_k[N] + eta) ** -0.25 * K**-0.5 * np.ones(len(zs))
        out.records += recs
        err = np.stack([r.metrics["error"] for r in recs])
        med[N] = np.median(err.transpose(1, 0, 2).reshape(len(zs), -1), axis=1)
    out.summary = {
        "kappas": kappas,
        "eta": eta,
        "median_error": {N: v for N, v in med.items()},
        "max_error": max((float(np.max(r.metrics["error"])) for r in out.records), default=0.0),
        "median_error_over_bound": {
            N: float(np.median(np.concatenate([(r.metrics["error"] / r.metrics["bound"][:, None]).ravel() for r in out.records if r.N == N])))
            for N in med
        },
    }
    if med:
        Nmax = max(med)
        if len(used_k[Nmax]) >= 4:
            out.fits["kappa"] = fit_scaling(used_k[Nmax] + eta, med[Nmax])
        full = [N for N in med if len(used_k[N]) == len(kappas)]
        if len(full) >= 4:
            for i, k in enumerate(kappas):
                Ks = [min(spec_at(spec, N).M, N) for N in full]
                out.fits[f"K@{k:g}"] = fit_scaling(Ks, [med[N][i] for N in full])
    return out


def _entrywise_trial(args):
    spec, trial, zs = args
    X = sample_covariance(spec, trial)
    dec = covariance_decomposition(X)
    diags = [control_diagnostics(X, z, dec) for z in zs]
    metrics = {k: np.array([d.as_metrics()[k] for d in diags]) for k in diags[0].as_metrics()}
    return TrialRecord("entrywise", spec.seed, trial, spec.N, spec.M, zs, metrics)


def experiment_entrywise(spec: EnsembleSpec, zs, Ns=None, trials: int = 50, omega: float = 0.1, jobs: int = 1) -> ExperimentResult:
    """Entrywise law: ``Lambda``, ``Lambda_o``, ``Theta`` and ``G`` deviations per point and trial."""
    _check_covariance(spec)
    Ns = tuple(Ns) if Ns is not None else (spec.N,)
    zs_all = np.atleast_1d(np.asarray(zs, dtype=complex))
    out = ExperimentResult("entrywise")
    theta = {}
    for N in Ns:
        sN = spec_at(spec, N)
        dom = DomainSpec(omega, min(sN.M, sN.N), "S", sN.phi)
        keep = np.array([dom.contains(z) for z in zs_all])
        for z in zs_all[~keep]:
            warnings.warn(f"z = {z} lies outside S for N = {N}; skipped", stacklevel=2)
            out.skipped.append({"N": N, "z": z})
        if not np.any(keep):
            continue
        recs = run_trials(_entrywise_trial, [(sN, t, zs_all[keep]) for t in range(trials)], jobs)
        out.records += recs
        th = np.stack([r.metrics["Theta"] for r in recs])
        theta[N] = (zs_all[keep], th)
    out.summary = {
        "max_Lambda_over_Psi": max((float(np.max(r.metrics["Lambda_over_Psi"])) for r in out.records), default=0.0),
        "max_Theta_N_eta": max((float(np.max(r.metrics["Theta_N_eta"])) for r in out.records), default=0.0),
        "max_G_ratio": max((float(np.max(r.metrics["G_ratio"])) for r in out.records), default=0.0),
        "Theta_le_Lambda": all(bool(np.all(r.metrics["Theta"] <= r.metrics["Lambda"])) for r in out.records),
        "median_Theta": {N: np.median(th, axis=0) for N, (z, th) in theta.items()},
        "zs": {N: z for N, (z, th) in theta.items()},
    }
    if len(theta) >= 4:
        common = set.intersection(*(set(z.tolist()) for z, _ in theta.values()))
        for z in sorted(common, key=lambda w: (w.real, w.imag)):
            vals = [float(np.median(th[:, list(zz).index(z)])) for zz, th in theta.values()]
            out.fits[f"Theta@{z.real:g}{z.imag:+g}i"] = fit_scaling(list(theta), vals)
    return out


def _rigidity_trial(args):
    spec, trial, alphas, gammas = args
    X = sample_covariance(spec, trial)
    A = X.conj().T @ X
    lam = linalg.eigvalsh((A + A.conj().T) / 2, check_finite=False)[::-1]
    K = min(spec.M, spec.N)
    lam = lam[:K]
    lo, hi = mp_edges(spec.phi)
    dev = lam[np.asarray(alphas) - 1] - gammas
    metrics = {
        "top": lam[0] - hi,
        "bottom": lam[K - 1] - lo,
        "deviation": dev,
        "sorted": float(np.all(np.diff(lam) <= 0)),
    }
    return TrialRecord("rigidity", spec.seed, trial, spec.N, spec.M, metrics=metrics, eigenvalues=lam)


def experiment_rigidity(
    spec: EnsembleSpec,
    alphas=None,
    Ns=(256, 512, 1024, 2048),
    trials: int = 100,
    c: float = 0.5,
    eps_grid=(0.25,),
    jobs: int = 1,
) -> ExperimentResult:
    """Eigenvalue rigidity against the classical locations.

    ``alphas`` are fractions of ``K`` in ``(0, 1]`` (mapped to indices per
    ``N``) or, if integers, fixed indices.  The default covers the top edge,
    the bulk ``alpha = K/2`` and the bottom edge.  The normalized statistic is
    ``|lambda_alpha - gamma_alpha| a^{1/3} K^{2/3}`` with ``a = alpha``, or
    ``a = min(alpha, K + 1 - alpha)`` when ``|phi - 1| >= c``.  Edge fits use
    the root mean square over trials.
    """
    _check_covariance(spec)
    out = ExperimentResult("rigidity")
    top, bottom, norm_by_N, samples = {}, {}, {}, {}
    for N in Ns:
        sN = spec_at(spec, N)
        K = min(sN.M, sN.N)
        idx = _alpha_indices(alphas, K)
        gam = np.array(classical_locations(N, sN.M, idx))
        if np.any(np.diff(gam) > 0):
            raise InvalidParameterError("classical locations are not ordered")
        recs = run_trials(_rigidity_trial, [(sN, t, idx, gam) for t in range(trials)], jobs)
        out.records += recs
        a = np.asarray(idx, dtype=float)
        if abs(sN.phi - 1) >= c:
            a = np.minimum(a, K + 1 - a)
        scale = a ** (1 / 3) * K ** (2 / 3)
        norm = np.stack([np.abs(r.metrics["deviation"]) * scale for r in recs])
        for r, row in zip(recs, norm):
            r.metrics["normalized"] = row
        norm_by_N[N] = (idx, norm)
        top[N] = math.sqrt(np.mean([r.metrics["top"] ** 2 for r in recs]))
        bottom[N] = math.sqrt(np.mean([r.metrics["bottom"] ** 2 for r in recs]))
        samples[N] = np.column_stack([norm.ravel(), np.ones(norm.size)])
    out.summary = {
        "rms_top": top,
        "rms_bottom": bottom,
        "median_normalized": {N: {int(i): float(np.median(n[:, k])) for k, i in enumerate(idx)} for N, (idx, n) in norm_by_N.items()},
        "all_sorted": all(r.metrics["sorted"] == 1.0 for r in out.records),
    }
    if len(Ns) >= 4:
        out.fits["top"] = fit_scaling(list(top), list(top.values()))
        out.fits["bottom"] = fit_scaling(list(bottom), list(bottom.values()))
    if len(Ns) >= 3 and trials >= 20:
        out.verdicts["domination"] = estimate_domination(samples, eps_grid)
    return out


def _alpha_indices(alphas, K):
    if alphas is None:
        alphas = (1, 2, 5, 10, 0.5, -10, -1)
    idx = []
    for a in alphas:
        if isinstance(a, (int, np.integer)):
            i = int(a) if a > 0 else K + 1 + int(a)
        else:
            i = max(1, int(round(float(a) * K)))
        if not 1 <= i <= K:
            raise InvalidParameterError(f"alpha {a} maps outside [1, {K}]")
        idx.append(i)
    return sorted(set(idx))


def _delocalization_trial(args):
    spec, trial, idx, V = args
    X = sample_covariance(spec, trial)
    dec = covariance_decomposition(X)
    N = spec.N
    # eigenvectors in descending eigenvalue order, alpha is 1-based
    U = dec.eigenvectors[:, ::-1][:, np.asarray(idx) - 1]
    metrics = {
        "max_coordinate": N * np.max(np.abs(U) ** 2, axis=0),
        "overlap": N * np.abs(V.conj() @ U) ** 2,
        "l1": np.sum(np.abs(U), axis=0) / math.sqrt(N),
        "abs_sum": np.abs(np.sum(U, axis=0)),
    }
    return TrialRecord("delocalization", spec.seed, trial, N, spec.M, metrics=metrics, overlaps=metrics["overlap"])


def experiment_delocalization(
    spec: EnsembleSpec,
    alphas=None,
    trials: int = 20,
    families=("coordinate", "random", "flat"),
    n_vectors: int = 4,
    eps: float = 0.05,
    c: float = 0.5,
    threshold_power: float = 0.2,
    jobs: int = 1,
) -> ExperimentResult:
    """Eigenvector delocalization and oscillation statistics.

    Records ``N |<u, v>|^2`` for fixed deterministic ``v``, the largest
    coordinate ``N max_i |u_i|^2``, ``sum_i |u_i| / sqrt(N)`` and
    ``|sum_i u_i|`` for eigenvectors ``u`` of ``X* X``.  Indices must satisfy
    ``alpha <= (1 - eps) K`` unless ``|phi - 1| >= c``.
    """
    _check_covariance(spec)
    N, M = spec.N, spec.M
    K = min(M, N)
    idx = _alpha_indices(alphas if alphas is not None else (0.4, 0.45, 0.5, 0.55, 0.6), K)
    if abs(spec.phi - 1) < c and max(idx) > (1 - eps) * K:
        raise InvalidParameterError(f"alpha must not exceed (1 - eps) K = {(1 - eps) * K:g}")
    vecs, labels = [], []
    for f in families:
        v, _ = vector_family(f, N, 2 * n_vectors, spec.seed)
        v = v[::2]
        vecs.append(v)
        labels += [f] * len(v)
    V = np.vstack(vecs)
    labels = np.array(labels)
    recs = run_trials(_delocalization_trial, [(spec, t, idx, V) for t in range(trials)], jobs)
    out = ExperimentResult("delocalization", recs)
    thr = N**threshold_power
    ov = np.stack([r.metrics["overlap"] for r in recs])
    mc = np.stack([r.metrics["max_coordinate"] for r in recs])
    l1 = np.stack([r.metrics["l1"] for r in recs])
    s = np.stack([r.metrics["abs_sum"] for r in recs])
    out.summary = {
        "alphas": idx,
        "threshold": thr,
        "fraction_overlap_below": float(np.mean(ov < thr)),
        "fraction_overlap_below_by_family": {f: float(np.mean(ov[:, labels == f, :] < thr)) for f in families},
        "min_fraction_per_vector": float(np.min(np.mean(ov < thr, axis=(0, 2)))),
        "fraction_max_coordinate_below": float(np.mean(mc < thr)),
        "median_max_coordinate": float(np.median(mc)),
        "l1_range": [float(l1.min()), float(l1.max())],
        "l1_mean": float(l1.mean()),
        "fraction_abs_sum_below": float(np.mean(s < thr)),
    }
    return out


def _fa_trial(args):
    spec, trial, zs, sub, n_check = args
    X = sample_covariance(spec, trial)
    dec = covariance_decomposition(X)
    zmax, zavg = [], []
    for z in zs:
        Z = z_fluctuations(dec, z, spec.M)
        zmax.append(np.max(np.abs(Z[sub])))
        zavg.append(abs(np.mean(Z)))
    metrics = {"Z_max": np.array(zmax), "Z_avg": np.array(zavg)}
    metrics["gain"] = metrics["Z_avg"] / metrics["Z_max"]
    if n_check > 0:
        mus = sub[:n_check]
        direct = z_fluctuations_direct(X, zs[0], mus)
        closed = z_fluctuations(dec, zs[0], spec.M)[mus]
        metrics["route_defect"] = float(np.max(np.abs(direct - closed)))
    return TrialRecord("fluctuation_averaging", spec.seed, trial, spec.N, spec.M, zs, metrics)


def experiment_fluctuation_averaging(
    spec: EnsembleSpec,
    E: float = 2.0,
    etas=None,
    trials: int = 30,
    n_sub: int = 32,
    n_check: int = 2,
    jobs: int = 1,
) -> ExperimentResult:
    """Fluctuation averaging of ``Z_mu`` along a ladder of ``eta``.

    ``max |Z_mu|`` runs over a fixed subsample of ``n_sub`` columns chosen
    before the matrix is drawn; ``[Z]`` averages over all columns.  Both use
    the closed form from one decomposition; on trial 0 ``n_check`` columns
    are recomputed from their defining quadratic form.  Fits are against
    ``N eta`` using the median over trials.
    """
    _check_covariance(spec)
    N = spec.N
    if etas is None:
        etas = np.geomspace(N**-0.8, 0.1, 8)
    etas = np.asarray(etas, dtype=float)
    if np.any(etas < N**-0.8 * (1 - 1e-12)) or np.any(etas > 0.1 * (1 + 1e-12)):
        raise InvalidParameterError("eta must lie in [N^-0.8, 0.1]")
    zs = E + 1j * etas
    n_sub = min(n_sub, N)
    sub = np.sort(substream(spec.seed, _SUBSET_KEY, N).choice(N, n_sub, replace=False))
    tasks = [(spec, t, zs, sub, n_check if t == 0 else 0) for t in range(trials)]
    recs = run_trials(_fa_trial, tasks, jobs)
    out = ExperimentResult("fluctuation_averaging", recs)
    zmax = np.median(np.stack([r.metrics["Z_max"] for r in recs]), axis=0)
    zavg = np.median(np.stack([r.metrics["Z_avg"] for r in recs]), axis=0)
    gain = np.stack([r.metrics["gain"] for r in recs])
    out.summary = {
        "N_eta": N * etas,
        "median_Z_max": zmax,
        "median_Z_avg": zavg,
        "n_sub": n_sub,
        "gain_fraction_below_one": float(np.mean(gain < 1)),
        "route_defect": max((r.metrics.get("route_defect", 0.0) for r in recs), default=0.0),
    }
    if len(etas) >= 4:
        out.fits["Z_max"] = fit_scaling(N * etas, zmax)
        out.fits["Z_avg"] = fit_scaling(N * etas, zavg)
        out.summary["exponent_gap"] = out.fits["Z_avg"].exponent - out.fits["Z_max"].exponent
    return out


def experiment_large_deviation(
    kind: str,
    sizes=(100, 400, 1600),
    trials: int = 100,
    entry: str = "complex-gaussian",
    coefficients: str = "random",
    eps_grid=(0.25,),
    seed: int = 0,
) -> ExperimentResult:
    """Large deviation bounds for linear, bilinear and off-diagonal forms.

    ``xi`` is the modulus of the form and ``zeta`` the l2 norm of its
    coefficients (off-diagonal part for ``"offdiag"``).  Coefficients are
    fixed per size before sampling: ``"random"`` gaussian or ``"flat"``
    (``b_i = 1`` and ``a_ij = 1/N``).
    """
    from ..ensembles import EntryDistribution

    if kind not in ("linear", "bilinear", "offdiag"):
        raise InvalidParameterError("kind must be 'linear', 'bilinear' or 'offdiag'")
    if coefficients not in ("random", "flat"):
        raise InvalidParameterError("coefficients must be 'random' or 'flat'")
    dist = EntryDistribution(entry)
    out = ExperimentResult("large_deviation")
    samples = {}
    for N in sizes:
        crng = substream(seed, _LDE_KEY, N)
        if kind == "linear":
            b = np.ones(N) if coefficients == "flat" else crng.standard_normal(N)
            zeta = float(np.linalg.norm(b))
        else:
            A = np.full((N, N), 1.0 / N) if coefficients == "flat" else crng.standard_normal((N, N)) / N
            if kind == "offdiag":
                A = A - np.diag(np.diag(A))
            zeta = float(np.linalg.norm(A))
        xs = []
        for t in range(trials):
            rng = substream(seed, t, 3, N)
            x = dist.sample(rng, N)
            if kind == "linear":
                val = b @ x
            elif kind == "bilinear":
                val = x.conj() @ A @ dist.sample(rng, N)
            else:
                val = x.conj() @ A @ x
            xs.append(abs(val))
        xs = np.array(xs)
        samples[N] = np.column_stack([xs, np.full(trials, zeta)])
        out.records.append(
            TrialRecord("large_deviation", seed, 0, N, N, metrics={"xi": xs, "zeta": zeta, "ratio": xs / zeta})
        )
    out.verdicts["domination"] = estimate_domination(samples, eps_grid)
    out.summary = {"kind": kind, "max_ratio": {N: float(np.max(s[:, 0] / s[:, 1])) for N, s in samples.items()}}
    return out


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of the stability check at one point ``z``."""

    z: complex
    deviation: float
    delta: float
    margin: float
    clipped: bool
    bound: float = 100.0

    @property
    def ok(self) -> bool:
        return self.margin <= self.bound


def check_stability_lemma(u_values, lattice, phi, N: int, bound: float = 100.0) -> StabilityReport:
    """Empirical constant in the stability estimate for ``u`` on ``L(z)``.

    ``lattice[0]`` is ``z`` and the remaining points share its real part.
    The envelope ``delta`` is the running maximum of ``|D(u)|`` from the top
    of the lattice down, so it is nonincreasing in ``eta``, and is clipped
    from below at ``N^-2``.  Returns the margin
    ``|u(z) - m_phi(z)| sqrt(kappa + eta + delta) / delta``.
    """
    lattice = np.asarray(lattice, dtype=complex)
    u = np.asarray(u_values, dtype=complex)
    if lattice.shape != u.shape or lattice.ndim != 1 or lattice.size == 0:
        raise InvalidParameterError("u_values and lattice must be equal-length 1-d arrays")
    if np.any(lattice.real != lattice[0].real):
        raise InvalidParameterError("lattice points must share the real part of z")
    order = np.argsort(-lattice.imag, kind="stable")
    D = np.abs(stability_operator(u[order], lattice[order], phi))
    env = np.maximum.accumulate(D)
    floor = float(N) ** -2
    clipped = bool(np.any(env < floor))
    env = np.maximum(env, floor)
    pos = int(np.flatnonzero(order == 0)[0])
    z = complex(lattice[0])
    delta = float(env[pos])
    if clipped and delta == floor:
        warnings.warn(f"delta clipped at the floor N^-2 = {floor:g}", stacklevel=2)
    dev = abs(u[0] - complex(mp_stieltjes(z, phi)))
    margin = dev * math.sqrt(kappa(z.real, phi) + z.imag + delta) / delta
    return StabilityReport(z, dev, delta, margin, clipped, bound)


def _stability_trial(args):
    spec, trial, zs, spacing = args
    X = sample_covariance(spec, trial)
    A = X.conj().T @ X
    lam = linalg.eigvalsh((A + A.conj().T) / 2, check_finite=False)
    margins, devs, deltas = [], [], []
    for z in zs:
        L = np.array(lattice_L(z, spacing=spacing))
        u = np.mean(1.0 / (lam[:, None] - L[None, :]), axis=0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = check_stability_lemma(u, L, spec.phi, spec.N)
        margins.append(rep.margin)
        devs.append(rep.deviation)
        deltas.append(rep.delta)
    metrics = {"margin": np.array(margins), "deviation": np.array(devs), "delta": np.array(deltas)}
    return TrialRecord("stability", spec.seed, trial, spec.N, spec.M, zs, metrics)


def experiment_stability(spec: EnsembleSpec, zs, trials: int = 20, spacing: float = 1e-3, jobs: int = 1) -> ExperimentResult:
    """Stability margins of the measured ``m_R`` over ``trials`` samples."""
    _check_covariance(spec)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    recs = run_trials(_stability_trial, [(spec, t, zs, spacing) for t in range(trials)], jobs)
    out = ExperimentResult("stability", recs)
    margins = np.stack([r.metrics["margin"] for r in recs])
    out.summary = {
        "median_margin": np.median(margins, axis=0),
        "fraction_ok": np.mean(margins <= 100.0, axis=0),
    }
    return out
