"""Dataset selection for runs."""

from typing import Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from ..core.exceptions import ConfigurationError
from .cifar import DEFAULT_CHUNK_RECORDS, load_cifar
from .dataset import Dataset
from .synthetic import synth_dataset


class DataConfig(BaseModel):
    source: Literal["synthetic", "cifar10", "cifar100"] = "synthetic"
    path: Optional[str] = Field(default=None, description="CIFAR directory (or its parent)")
    train_size: int = Field(default=512, ge=1, description="Synthetic train samples")
    val_size: int = Field(default=256, ge=1, description="Synthetic validation samples")
    classes: int = Field(default=10, ge=2, description="Synthetic class count")
    difficulty: float = Field(default=0.0, ge=0.0)
    chunk_records: int = Field(default=DEFAULT_CHUNK_RECORDS, ge=1)

    @model_validator(mode="after")
    def check_path(self) -> "DataConfig":
        if self.source != "synthetic" and not self.path:
            raise ValueError(f"data.path is required for source {self.source}")
        return self


def load_datasets(config: DataConfig, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """(train, validation) splits; CIFAR's test split serves as validation."""
    if config.source == "synthetic":
        train = synth_dataset(seed, config.train_size, config.classes, config.difficulty, "train")
        val = synth_dataset(seed, config.val_size, config.classes, config.difficulty, "val")
        return train, val
    if config.path is None:
        raise ConfigurationError(f"data.path is required for source {config.source}")
    return load_cifar(config.path, config.source, config.chunk_records)
