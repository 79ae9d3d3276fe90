"""Seeded Monte Carlo harness comparing simulated statistics with exact predictions."""

from .config import ConfigError, Experiment, ExperimentFile, SpecModel, TrialConfig, load_experiment_file
from .experiments import (
    RUNNERS,
    Report,
    TrialRecord,
    retry_seed,
    run_ccc_coverage,
    run_experiment,
    run_prop1_equivalence,
    run_thm4_miscoverage,
    run_vanilla_coverage,
    run_violation_cdf,
    run_violation_mean,
    trial_seed,
)
from .reporting import csv_text, describe, file_stem, summary, summary_text, write_report
from .stats import Check, ks_statistic, ks_threshold

__all__ = [
    "RUNNERS",
    "Check",
    "ConfigError",
    "Experiment",
    "ExperimentFile",
    "Report",
    "SpecModel",
    "TrialConfig",
    "TrialRecord",
    "csv_text",
    "describe",
    "file_stem",
    "ks_statistic",
    "ks_threshold",
    "load_experiment_file",
    "retry_seed",
    "run_ccc_coverage",
    "run_experiment",
    "run_prop1_equivalence",
    "run_thm4_miscoverage",
    "run_vanilla_coverage",
    "run_violation_cdf",
    "run_violation_mean",
    "summary",
    "summary_text",
    "trial_seed",
    "write_report",
]
