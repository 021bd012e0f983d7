"""Command-line entry point and run configuration."""

from .main import build_parser, main, run
from .run_config import DESK_OVERRIDES, LayerProbe, RunConfig, load_run_config

__all__ = [
    "DESK_OVERRIDES",
    "LayerProbe",
    "RunConfig",
    "build_parser",
    "load_run_config",
    "main",
    "run",
]
