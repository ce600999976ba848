"""Config-driven experiment sweeps over the synthetic task families."""

from .config import ExperimentConfig, GeneratorSpec, config_from_dict, load_config
from .render import render
from .runner import ExperimentResult, run, run_cell

__all__ = ["ExperimentConfig", "ExperimentResult", "GeneratorSpec", "config_from_dict",
           "load_config", "render", "run", "run_cell"]
