"""Configuration, execution and persistence of Monte Carlo experiments."""

from .config import (ConfigError, ExperimentConfig, ExperimentKind, FormsConfig, LawConfig,
                     SpikeConfig, dumps_config, load_config, loads_config, write_config)
from .experiments import ExperimentError, ExperimentResult, run_experiment, select_limit
from .io import read_column, write_result

__all__ = [
    "ConfigError", "ExperimentConfig", "ExperimentError", "ExperimentKind", "ExperimentResult",
    "FormsConfig", "LawConfig", "SpikeConfig", "dumps_config", "load_config", "loads_config",
    "read_column", "run_experiment", "select_limit", "write_config", "write_result",
]
