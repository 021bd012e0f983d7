"""Ambient services: configuration, logging and the exception hierarchy."""

from .config import ConfigManager, LoggingConfig, RuntimeSettings, get_settings
from .exceptions import (
    CheckpointError,
    ConfigurationError,
    DataFormatError,
    DivergenceError,
    DivisibilityError,
    HgcError,
    ShapeError,
    StateError,
    TrainingError,
    ValidationError,
)
from .logging import LogManager, setup_logging

__all__ = [
    "CheckpointError",
    "ConfigManager",
    "ConfigurationError",
    "DataFormatError",
    "DivergenceError",
    "DivisibilityError",
    "HgcError",
    "LogManager",
    "LoggingConfig",
    "RuntimeSettings",
    "ShapeError",
    "StateError",
    "TrainingError",
    "ValidationError",
    "get_settings",
    "setup_logging",
]
