"""Experiment harness: YAML configs, runners, table output and the ``lisl-hjb`` CLI."""

from .config import ExperimentConfig, config_from_dict, load_config, resolve_dt
from .emit import Table, emit, render
from .experiments import (ConvergenceRow, run_convergence, run_experiment, run_lfa,
                          run_solver_bench, run_spectrum)

__all__ = [
    "ConvergenceRow", "ExperimentConfig", "Table", "config_from_dict", "emit", "load_config",
    "render", "resolve_dt", "run_convergence", "run_experiment", "run_lfa", "run_solver_bench",
    "run_spectrum",
]
