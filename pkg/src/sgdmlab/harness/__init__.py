"""Experiment orchestration: configs, seeded multi-trial runs, comparisons."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .plotdata import emit_plotdata
from .runner import RunRecord, compare_runs, run_experiment

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RunRecord",
    "compare_runs",
    "emit_plotdata",
    "load_config",
    "parse_config",
    "run_experiment",
]
