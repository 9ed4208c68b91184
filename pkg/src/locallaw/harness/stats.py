"""Trial records, scaling fits and the stochastic-domination estimator."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import InvalidParameterError

__all__ = [
    "CSV_COLUMNS",
    "CSV_SCHEMA_VERSION",
    "TrialRecord",
    "ScalingFit",
    "fit_scaling",
    "DominationVerdict",
    "estimate_domination",
    "run_trials",
    "write_csv",
    "records_to_json",
]

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = ("experiment", "seed", "trial", "N", "M", "phi", "z_re", "z_im", "metric", "value")


@dataclass
class TrialRecord:
    """Statistics measured on one sampled matrix.

    ``metrics`` maps a name to either a scalar or an array whose first axis
    runs over ``zs``.  ``eigenvalues`` and ``overlaps`` are optional.
    """

    experiment: str
    seed: int
    trial: int
    N: int
    M: int
    zs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    metrics: dict = field(default_factory=dict)
    eigenvalues: np.ndarray | None = None
    overlaps: np.ndarray | None = None

    def __post_init__(self):
        self.zs = np.atleast_1d(np.asarray(self.zs, dtype=complex))
        for name, val in self.metrics.items():
            if not np.all(np.isfinite(np.asarray(val))):
                raise InvalidParameterError(f"metric {name!r} is not finite")

    @property
    def phi(self) -> float:
        return self.M / self.N

    def rows(self):
        """Long-format rows in :data:`CSV_COLUMNS` order."""
        head = (self.experiment, self.seed, self.trial, self.N, self.M, repr(self.phi))
        for name in sorted(self.metrics):
            val = np.asarray(self.metrics[name])
            if val.ndim == 0:
                yield head + ("", "", name, repr(float(val)))
                continue
            per_z = val.shape[0] == len(self.zs) and len(self.zs) > 0
            for idx in np.ndindex(val.shape):
                label = name if val.ndim == 1 and per_z else name + "[" + ",".join(map(str, idx)) + "]"
                if per_z:
                    z = self.zs[idx[0]]
                    zre, zim = repr(float(z.real)), repr(float(z.imag))
                else:
                    zre = zim = ""
                if val.ndim > 1 and per_z:
                    label = name + "[" + ",".join(map(str, idx[1:])) + "]"
                yield head + (zre, zim, label, repr(float(val[idx])))


def write_csv(records, path) -> int:
    """Write records in long format; returns the number of data rows."""
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for rec in sorted(records, key=lambda r: (r.experiment, r.N, r.seed, r.trial)):
            for row in rec.rows():
                w.writerow(row)
                n += 1
    return n


def records_to_json(records) -> str:
    rows = [dict(zip(CSV_COLUMNS, row)) for rec in records for row in rec.rows()]
    return json.dumps({"schema_version": CSV_SCHEMA_VERSION, "rows": rows}, sort_keys=True)


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares slope of ``log metric`` against ``log x``."""

    exponent: float
    stderr: float
    intercept: float
    points: tuple

    def within(self, target: float, tol: float) -> bool:
        return abs(self.exponent - target) <= tol

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "stderr": self.stderr,
            "intercept": self.intercept,
            "points": [list(p) for p in self.points],
        }


def fit_scaling(x, y) -> ScalingFit:
    """Fit ``y ~ C x^exponent`` by ordinary least squares in log-log coordinates.

    Requires at least four distinct positive abscissae and positive ordinates.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidParameterError("x and y must be 1-d arrays of equal length")
    if len(np.unique(x)) < 4:
        raise InvalidParameterError("a scaling fit needs at least four distinct x values")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise InvalidParameterError("scaling fits need positive finite data")
    lx, ly = np.log(x), np.log(y)
    res = stats.linregress(lx, ly)
    return ScalingFit(float(res.slope), float(res.stderr), float(res.intercept), tuple(zip(lx.tolist(), ly.tolist())))


@dataclass(frozen=True)
class DominationVerdict:
    """Exceedance table for the events ``xi > N^eps zeta``.

    ``fractions[eps]`` is aligned with ``Ns``; ``trend[eps]`` is the slope of
    the fraction against ``log N``.
    """

    eps_grid: tuple
    Ns: tuple
    counts: tuple
    fractions: dict
    trend: dict
    per_eps: dict
    verdict: str

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"

    def as_dict(self) -> dict:
        return {
            "eps_grid": list(self.eps_grid),
            "Ns": list(self.Ns),
            "counts": list(self.counts),
            "fractions": {repr(e): list(map(float, f)) for e, f in self.fractions.items()},
            "trend": {repr(e): t for e, t in self.trend.items()},
            "per_eps": {repr(e): v for e, v in self.per_eps.items()},
            "verdict": self.verdict,
        }


def estimate_domination(samples, eps_grid=(0.25,), min_trials: int = 20, max_final_fraction: float = 0.5) -> DominationVerdict:
    """Finite-N test of ``xi < zeta`` in the stochastic-domination sense.

    Parameters
    ----------
    samples : mapping
        ``N -> sequence of (xi, zeta)`` pairs.
    eps_grid : sequence of float
        Exponents ``eps > 0`` for the events ``xi > N^eps zeta``.
    min_trials : int
        Minimum number of pairs per ``N``.
    max_final_fraction : float
        Upper bound on the exceedance fraction at the largest ``N``.

    Notes
    -----
    For each ``eps`` the verdict requires the exceedance fraction to be
    nonincreasing in ``N`` up to two binomial standard deviations of the
    difference, and the fraction at the largest ``N`` to be at most
    ``max_final_fraction``.  The second condition rejects fractions that are
    flat at one, which never decay.
    """
    if len(samples) < 3:
        raise InvalidParameterError("at least three distinct N values are required")
    Ns = tuple(sorted(int(n) for n in samples))
    if len(set(Ns)) != len(Ns):
        raise InvalidParameterError("N values must be distinct")
    data = {}
    for N in Ns:
        arr = np.asarray(samples[N], dtype=float).reshape(-1, 2)
        if arr.shape[0] < min_trials:
            raise InvalidParameterError(f"N = {N} has {arr.shape[0]} samples, need {min_trials}")
        if np.any(np.isnan(arr)):
            raise InvalidParameterError("samples contain NaN")
        data[N] = arr
    eps_grid = tuple(float(e) for e in eps_grid)
    if not eps_grid or any(e <= 0 for e in eps_grid):
        raise InvalidParameterError("eps values must be positive")
    counts = tuple(data[N].shape[0] for N in Ns)
    fractions, trend, per_eps = {}, {}, {}
    for eps in eps_grid:
        f = np.array([np.mean(data[N][:, 0] > N**eps * data[N][:, 1]) for N in Ns])
        fractions[eps] = f
        trend[eps] = float(np.polyfit(np.log(Ns), f, 1)[0]) if np.ptp(f) > 0 else 0.0
        ok = f[-1] <= max_final_fraction
        for k in range(len(Ns) - 1):
            n0, n1 = counts[k], counts[k + 1]
            p = (f[k] * n0 + f[k + 1] * n1) / (n0 + n1)
            slack = 2.0 * math.sqrt(p * (1 - p) * (1 / n0 + 1 / n1))
            if f[k + 1] > f[k] + slack:
                ok = False
        per_eps[eps] = "consistent" if ok else "inconsistent"
    verdict = "consistent" if all(v == "consistent" for v in per_eps.values()) else "inconsistent"
    return DominationVerdict(eps_grid, Ns, counts, fractions, trend, per_eps, verdict)


def run_trials(fn, tasks, jobs: int = 1) -> list:
    """Map ``fn`` over ``tasks``, optionally in worker processes.

    Results come back in task order, so aggregation does not depend on ``jobs``.
    ``fn`` must be a module-level function when ``jobs > 1``.
    """
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))
