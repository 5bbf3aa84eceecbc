"""Config-driven command-line front end."""

from .config import PROFILES, ConfigError, ExperimentConfig
from .main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, build_parser, main

__all__ = ["PROFILES", "ConfigError", "ExperimentConfig", "EXIT_OK", "EXIT_RUNTIME", "EXIT_USAGE",
           "build_parser", "main"]
