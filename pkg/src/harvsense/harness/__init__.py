"""Configuration, experiment pipeline, plots and the ``harvsense`` CLI."""

from .config import ExperimentConfig, load_config
from .pipeline import RunReport, run_pipeline, run_sweep

__all__ = ["ExperimentConfig", "RunReport", "load_config", "run_pipeline", "run_sweep"]
