"""Configuration, Monte Carlo driver, export and command line."""
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import (
    ExperimentResult,
    SweepResult,
    TrialRecord,
    run_experiment,
    run_trial,
    scaling_sweep,
    trial_seed,
)
from .export import export, read_records, read_summary, write_records, write_summary

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "SweepResult",
    "TrialRecord",
    "export",
    "load_config",
    "read_records",
    "read_summary",
    "run_experiment",
    "run_trial",
    "scaling_sweep",
    "trial_seed",
    "write_records",
    "write_summary",
]
