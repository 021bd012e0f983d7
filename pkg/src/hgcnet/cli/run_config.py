"""Merged run configuration: network, training, data, logging and paths."""

import argparse
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..core.config import ConfigManager, LoggingConfig, get_settings
from ..core.exceptions import ConfigurationError, ValidationError
from ..data.config import DataConfig
from ..netbuilder.spec import NetworkSpec
from ..training.config import TrainConfig

DESK_OVERRIDES: Dict[str, Any] = {
    "train": {"epochs": 30, "batch_size": 64},
    "data": {"source": "synthetic", "train_size": 512, "val_size": 256},
}


class LayerProbe(BaseModel):
    """A single layer to analyze instead of a whole network."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["hgc", "sgc", "dense", "depthwise"] = "hgc"
    in_channels: int = Field(ge=1)
    out_channels: int = Field(ge=1)
    groups: int = Field(default=1, ge=1)
    height: int = Field(default=1, ge=1)
    width: int = Field(default=1, ge=1)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    net: NetworkSpec = Field(default_factory=NetworkSpec)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    layer: Optional[LayerProbe] = Field(default=None, description="Analyze one layer only")
    out_dir: str = Field(default="runs/latest", description="Directory for reports and metrics")
    checkpoint: Optional[str] = Field(default=None, description="Checkpoint to resume or evaluate")
    seed: int = Field(default=0, ge=0, description="Weight initialization and synthetic data seed")

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    def check_paths(self) -> None:
        """Referenced inputs must exist before train or eval starts."""
        if self.data.source != "synthetic" and self.data.path and not Path(self.data.path).exists():
            raise ConfigurationError(f"data.path does not exist: {self.data.path}")
        if self.checkpoint and not Path(self.checkpoint).is_file():
            raise ConfigurationError(f"checkpoint does not exist: {self.checkpoint}")


def flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
        overrides["train"] = {"seed": args.seed}
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    if getattr(args, "resume", None):
        overrides["checkpoint"] = args.resume
    if getattr(args, "variant", None):
        overrides["net"] = {"variant": args.variant}
    logging: Dict[str, Any] = {}
    if getattr(args, "log_level", None):
        logging["level"] = args.log_level
    if getattr(args, "log_format", None):
        logging["format"] = args.log_format
    if logging:
        overrides["logging"] = logging
    return overrides


def runtime_overrides() -> Dict[str, Any]:
    """HGC_LOG_LEVEL / HGC_LOG_FORMAT from the process settings."""
    settings = get_settings()
    logging = {
        key: value
        for key, value in (("level", settings.log_level), ("format", settings.log_format))
        if value
    }
    return {"logging": logging} if logging else {}


def load_run_config(
    args: argparse.Namespace, environ: Optional[Mapping[str, str]] = None
) -> RunConfig:
    """Defaults < config file < environment < --desk < command-line flags.

    Raises:
        ConfigurationError: unreadable file, unknown key, invalid value, or a
            network whose modules cannot be split into its groups
    """
    layers: List[Dict[str, Any]] = [runtime_overrides()]
    if getattr(args, "desk", False):
        layers.append(DESK_OVERRIDES)
    layers.append(flag_overrides(args))
    cfg = ConfigManager(RunConfig, getattr(args, "config", None), environ).build(*layers)
    try:
        cfg.net.module_placements()
    except ValidationError as e:
        raise ConfigurationError(f"invalid network: {e}") from e
    return cfg
