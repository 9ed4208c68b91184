"""Command-line entry point: run experiments from flat configs and evaluate laws."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import (
    CriterionResult,
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
)
from .ensembles import ENTRY_TAGS, EnsembleSpec
from .errors import InvalidParameterError, LocalLawError, ResourceError
from .harness import (
    experiment_entrywise,
    experiment_large_deviation,
    experiment_stability,
    write_csv,
)
from .laws import classical_locations, control_psi, mp_stieltjes, sc_stieltjes

REPORT_SCHEMA_VERSION = 1

EXPERIMENTS = (
    "laws",
    "identities",
    "expansion",
    "diagonal_expansion",
    "isotropic",
    "outside",
    "entrywise",
    "rigidity",
    "delocalization",
    "fluctuation_averaging",
    "large_deviation",
    "stability",
    "domination",
)


def _ints(text: str) -> tuple:
    text = text.strip()
    return tuple(int(t) for t in text.split(",") if t.strip()) if text else ()


def _fmt_ints(vals) -> str:
    return ",".join(str(v) for v in vals)


@dataclass(frozen=True)
class RunConfig:
    """Flat ``key = value`` run configuration.

    ``n_ladder`` is a comma-separated list of ``N`` values; when empty the
    single size ``N`` is used.  ``eta_scale`` is ``log`` or ``linear``.
    ``ratio_max`` overrides the isotropic ratio threshold.
    """

    experiment: str = "isotropic"
    kind: str = "sample-covariance"
    M: int = 64
    N: int = 64
    entry: str = "real-gaussian"
    seed: int = 0
    trials: int = 3
    n_ladder: tuple = ()
    e_min: float = 0.5
    e_max: float = 3.5
    e_points: int = 4
    eta_min: float = 0.05
    eta_max: float = 1.0
    eta_points: int = 3
    eta_scale: str = "log"
    ratio_max: float = 10.0
    jobs: int = 1
    out: str = "locallaw-out"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidParameterError(f"unknown experiment {self.experiment!r}; valid ids: {', '.join(EXPERIMENTS)}")
        if self.entry not in ENTRY_TAGS:
            raise InvalidParameterError(f"unknown entry {self.entry!r}; valid: {', '.join(ENTRY_TAGS)}")
        if self.eta_scale not in ("log", "linear"):
            raise InvalidParameterError("eta_scale must be 'log' or 'linear'")
        if self.M <= 0 or self.N <= 0 or self.trials <= 0 or self.jobs <= 0:
            raise InvalidParameterError("M, N, trials and jobs must be positive")
        if self.e_points <= 0 or self.eta_points <= 0 or not 0 < self.eta_min <= self.eta_max:
            raise InvalidParameterError("grid descriptors must be positive with eta_min <= eta_max")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")

    @classmethod
    def keys(cls) -> tuple:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def _convert(cls, key: str, raw: str):
        ftype = {f.name: f.type for f in fields(cls)}[key]
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "tuple":
            return _ints(raw)
        return raw

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment.

        Errors name the offending line and key.
        """
        vals = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidParameterError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = (s.strip() for s in line.partition("="))
            if key not in cls.keys():
                raise InvalidParameterError(f"line {lineno}: unknown key {key!r}; valid keys: {', '.join(cls.keys())}")
            if key in vals:
                raise InvalidParameterError(f"line {lineno}: duplicate key {key!r}")
            try:
                vals[key] = cls._convert(key, value)
            except ValueError as exc:
                raise InvalidParameterError(f"line {lineno}: bad value for {key!r}: {exc}") from None
        return cls(**vals)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {_fmt_ints(v) if f.type == 'tuple' else v}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return {f.name: (list(getattr(self, f.name)) if f.type == "tuple" else getattr(self, f.name)) for f in fields(self)}

    @property
    def ladder(self) -> tuple:
        return self.n_ladder if self.n_ladder else (self.N,)

    def spec(self) -> EnsembleSpec:
        return EnsembleSpec(self.kind, self.M, self.N, self.entry, seed=self.seed)

    def grid(self) -> np.ndarray:
        Es = np.linspace(self.e_min, self.e_max, self.e_points)
        if self.eta_scale == "log":
            etas = np.geomspace(self.eta_min, self.eta_max, self.eta_points)
        else:
            etas = np.linspace(self.eta_min, self.eta_max, self.eta_points)
        return np.array([complex(E, eta) for E in Es for eta in etas])


def _run_experiment(cfg: RunConfig):
    """Run ``cfg.experiment``; returns ``(criteria, experiment_results)``."""
    ladder = cfg.ladder
    spec = cfg.spec()
    ladder4 = ladder if len(ladder) >= 4 else (cfg.N, 2 * cfg.N, 4 * cfg.N, 8 * cfg.N)
    e = cfg.experiment
    if e == "laws":
        return [criterion_1(seed=cfg.seed)], []
    if e == "identities":
        return [criterion_2(seed=cfg.seed)], []
    if e == "expansion":
        return [criterion_3(seeds=tuple(cfg.seed + k for k in range(3)))], []
    if e == "diagonal_expansion":
        return [criterion_4(seeds=tuple(cfg.seed + k for k in range(3)))], []
    if e == "isotropic":
        return [criterion_5(entries=(cfg.entry,), Ns=ladder, trials=cfg.trials, zs=cfg.grid(), seed=cfg.seed, ratio_max=cfg.ratio_max, jobs=cfg.jobs)], []
    if e == "outside":
        return [criterion_6(Ns=ladder4, trials=cfg.trials, entry=cfg.entry, seed=cfg.seed, jobs=cfg.jobs)], []
    if e == "rigidity":
        return [criterion_7(Ns=ladder4, trials=cfg.trials, entry=cfg.entry, seed=cfg.seed, jobs=cfg.jobs)], []
    if e == "delocalization":
        return [criterion_8(N=cfg.N, trials=cfg.trials, entry=cfg.entry, seed=cfg.seed, jobs=cfg.jobs)], []
    if e == "fluctuation_averaging":
        return [criterion_9(N=cfg.N, trials=cfg.trials, entry=cfg.entry, seed=cfg.seed, jobs=cfg.jobs)], []
    if e == "domination":
        return [criterion_10(seed=cfg.seed)], []
    if e == "entrywise":
        out = experiment_entrywise(spec, cfg.grid(), Ns=ladder, trials=cfg.trials, jobs=cfg.jobs)
        res = CriterionResult("entrywise", "entrywise law diagnostics")
        res.add("Theta_le_Lambda", out.summary["Theta_le_Lambda"], out.summary["Theta_le_Lambda"], "Theta <= Lambda on every record")
        res.add("trace_two_ways", max(float(np.max(r.metrics["trace_defect"])) for r in out.records) < 1e-9, None, "< 1e-9")
        return [res], [out]
    if e == "large_deviation":
        res = CriterionResult("large_deviation", "large deviation bounds")
        outs = []
        for kind in ("linear", "bilinear", "offdiag"):
            out = experiment_large_deviation(kind, sizes=ladder if len(ladder) >= 3 else (100, 400, 1600), trials=max(cfg.trials, 20), seed=cfg.seed)
            res.add(kind, out.verdicts["domination"].consistent, out.verdicts["domination"].verdict, "consistent")
            outs.append(out)
        return [res], outs
    if e == "stability":
        out = experiment_stability(spec, cfg.grid(), trials=cfg.trials, jobs=cfg.jobs)
        frac = float(np.min(out.summary["fraction_ok"]))
        res = CriterionResult("stability", "stability margins")
        res.add("margin_le_100", frac >= 0.9, frac, "fraction of margins <= 100 at least 0.9 per point")
        return [res], [out]
    raise InvalidParameterError(f"unknown experiment {e!r}; valid ids: {', '.join(EXPERIMENTS)}")


def run(cfg: RunConfig, out_dir=None) -> tuple:
    """Execute a configuration and write ``records.csv`` and ``report.json``.

    Returns ``(exit_status, report_dict)``.
    """
    out_dir = Path(out_dir if out_dir is not None else cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    partial = False
    error = None
    criteria, results = [], []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            criteria, results = _run_experiment(cfg)
        except ResourceError as exc:
            partial = True
            error = str(exc)
    results = [r for c in criteria for r in c.results] + list(results)
    records = [r for res in results for r in res.records]
    write_csv(records, out_dir / "records.csv")
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": __version__,
        "config": cfg.as_dict(),
        "criteria": [c.as_dict() for c in criteria],
        "summary": {c.cid: _clean(c.info) for c in criteria},
        "experiments": [_clean(r.as_dict()) for r in results if not any(r in c.results for c in criteria)],
        "warnings": sorted({str(w.message) for w in caught}),
        "partial": partial,
        "error": error,
        "all_passed": bool(criteria) and all(c.passed for c in criteria) and not partial,
        "wall_clock_seconds": time.perf_counter() - t0,
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=_default))
    status = 0 if report["all_passed"] else (3 if partial else 1)
    return status, report


def _clean(obj):
    from .harness.experiments import _jsonable

    return _jsonable(obj)


def _default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def parse_complex(text: str) -> complex:
    """Accept ``2+1e-9i`` as well as Python's ``2+1e-9j``."""
    try:
        return complex(text.strip().replace("i", "j").replace(" ", ""))
    except ValueError:
        raise InvalidParameterError(f"cannot parse complex number {text!r}") from None


def _g(x: float) -> str:
    return f"{x:.15g}"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="locallaw", description="Local law experiments and law evaluations.")
    p.add_argument("--version", action="version", version=f"locallaw {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a config file and/or flags")
    r.add_argument("--config", metavar="PATH", help="flat key = value config file")
    for f in fields(RunConfig):
        helptext = {
            "experiment": "experiment id: " + ", ".join(EXPERIMENTS),
            "n_ladder": "comma-separated N values",
            "jobs": "worker processes (env LOCALLAW_JOBS overrides the config)",
            "out": "output directory",
            "seed": "master seed (64-bit unsigned)",
        }.get(f.name, f"config key {f.name}")
        r.add_argument(f"--{f.name}", dest=f.name, default=None, help=helptext)
    e = sub.add_parser("eval", help="evaluate a deterministic law")
    e.add_argument("law", choices=("mp", "sc", "gamma", "psi"))
    e.add_argument("--phi", type=float, default=1.0)
    e.add_argument("--z", type=str, default=None)
    e.add_argument("--N", type=int, default=None)
    e.add_argument("--alpha", type=int, default=None)
    return p


def _config_from_args(args) -> RunConfig:
    base = RunConfig.parse(Path(args.config).read_text()) if args.config else None
    vals = base.as_dict() if base is not None else {}
    vals = {k: (tuple(v) if isinstance(v, list) else v) for k, v in vals.items()}
    env_jobs = os.environ.get("LOCALLAW_JOBS")
    if env_jobs:
        vals["jobs"] = int(env_jobs)
    for key in RunConfig.keys():
        raw = getattr(args, key)
        if raw is not None:
            try:
                vals[key] = RunConfig._convert(key, raw)
            except ValueError as exc:
                raise InvalidParameterError(f"flag --{key}: {exc}") from None
    if base is None:
        return RunConfig(**vals)
    return replace(base, **vals)


def _eval(args) -> int:
    if args.law == "mp":
        if args.z is None:
            raise InvalidParameterError("--z is required")
        m = complex(mp_stieltjes(parse_complex(args.z), args.phi))
        print(_g(m.real), _g(m.imag))
    elif args.law == "sc":
        if args.z is None:
            raise InvalidParameterError("--z is required")
        m = complex(sc_stieltjes(parse_complex(args.z)))
        print(_g(m.real), _g(m.imag))
    elif args.law == "gamma":
        if args.N is None or args.alpha is None:
            raise InvalidParameterError("--N and --alpha are required")
        M = int(round(args.phi * args.N))
        print(_g(classical_locations(args.N, M, [args.alpha])[0]))
    else:
        if args.N is None or args.z is None:
            raise InvalidParameterError("--N and --z are required")
        print(_g(control_psi(parse_complex(args.z), args.phi, args.N)))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "eval":
            return _eval(args)
        cfg = _config_from_args(args)
        status, report = run(cfg)
    except (LocalLawError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for c in report["criteria"]:
        print(f"{c['id']} {'PASS' if c['passed'] else 'FAIL'}: {c['title']}")
    if report["partial"]:
        print(f"partial report: {report['error']}")
    return status


if __name__ == "__main__":
    sys.exit(main())
