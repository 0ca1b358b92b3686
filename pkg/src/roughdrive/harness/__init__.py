"""Experiment harness: configs, runner, reports and named suites."""

from .config import ExperimentConfig, load_config, parse_config
from .report import Check, Report, write_report
from .runner import clear_caches, run_config

__all__ = ["Check", "ExperimentConfig", "Report", "clear_caches", "load_config", "parse_config",
           "run_config", "write_report"]
