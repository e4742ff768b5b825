"""Experiment harness: configs, pipelines, persistence, reports and the CLI."""

from .config import ExperimentConfig, load_config, parse_config
from .serialization import load_model, save_model

__all__ = ["ExperimentConfig", "load_config", "parse_config", "load_model", "save_model"]
