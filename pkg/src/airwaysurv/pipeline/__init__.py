"""Batch orchestration and command-line interface."""
from .config import CONFIG_VERSION, PipelineConfig, config_from_dict, load_config, save_config

__all__ = ["CONFIG_VERSION", "PipelineConfig", "config_from_dict", "load_config", "save_config"]
