"""Monte Carlo verification harness: experiments, diagnostics and statistics."""

from .diagnostics import (
    ControlDiagnostics,
    control_diagnostics,
    covariance_decomposition,
    z_fluctuations,
    z_fluctuations_direct,
)
from .experiments import (
    FAMILIES,
    ExperimentResult,
    StabilityReport,
    check_stability_lemma,
    experiment_delocalization,
    experiment_entrywise,
    experiment_fluctuation_averaging,
    experiment_isotropic,
    experiment_large_deviation,
    experiment_outside,
    experiment_rigidity,
    experiment_stability,
    spec_at,
    vector_family,
)
from .stats import (
    CSV_COLUMNS,
    CSV_SCHEMA_VERSION,
    DominationVerdict,
    ScalingFit,
    TrialRecord,
    estimate_domination,
    fit_scaling,
    records_to_json,
    run_trials,
    write_csv,
)

__all__ = [
    "ControlDiagnostics", "control_diagnostics", "covariance_decomposition",
    "z_fluctuations", "z_fluctuations_direct",
    "FAMILIES", "ExperimentResult", "StabilityReport", "check_stability_lemma",
    "experiment_delocalization", "experiment_entrywise", "experiment_fluctuation_averaging",
    "experiment_isotropic", "experiment_large_deviation", "experiment_outside",
    "experiment_rigidity", "experiment_stability", "spec_at", "vector_family",
    "CSV_COLUMNS", "CSV_SCHEMA_VERSION", "DominationVerdict", "ScalingFit", "TrialRecord",
    "estimate_domination", "fit_scaling", "records_to_json", "run_trials", "write_csv",
]
