"""Experiment harness: configuration, replicated runs and report files."""
from .config import PRESETS, ConfigError, ExperimentConfig, load_config, preset
from .experiment import ExperimentReport, run_experiment
from .output import emit_figure_data, read_report, write_report, write_tables

__all__ = [
    "PRESETS", "ConfigError", "ExperimentConfig", "ExperimentReport", "emit_figure_data",
    "load_config", "preset", "read_report", "run_experiment", "write_report", "write_tables",
]
