from .compare import ComparisonError, DiffReport, compare_runs
from .config import ConfigError, ExperimentSpec, format_beta, load_spec, parse_spec
from .runner import render_dir, run_experiment

__all__ = ["ComparisonError", "DiffReport", "compare_runs", "ConfigError", "ExperimentSpec",
           "format_beta", "load_spec", "parse_spec", "render_dir", "run_experiment"]
