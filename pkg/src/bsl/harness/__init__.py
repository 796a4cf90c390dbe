"""Config-driven experiment harness: parsing, pipelines, runner, CLI."""

from .config import (
    EXPERIMENT_KINDS,
    ExperimentConfig,
    ExperimentOptions,
    FrozenNetFamilyConfig,
    QuadraticFamilyConfig,
    config_from_dict,
    config_hash,
    load_config,
)
from .runner import RunSummary, load_summary, run_experiment
from .pipelines import compare_methods

__all__ = [
    "EXPERIMENT_KINDS",
    "ExperimentConfig",
    "ExperimentOptions",
    "FrozenNetFamilyConfig",
    "QuadraticFamilyConfig",
    "config_from_dict",
    "config_hash",
    "load_config",
    "RunSummary",
    "load_summary",
    "run_experiment",
    "compare_methods",
]
