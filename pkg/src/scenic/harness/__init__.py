"""Experiment runner, SVG plotting and the command line interface."""

from .experiment import ExperimentConfig, load_config, recompute_table, run_experiment
from .plot import plot_series

__all__ = ["ExperimentConfig", "load_config", "plot_series", "recompute_table", "run_experiment"]
