"""Training hyperparameters. Defaults follow the full CIFAR protocol."""

from pydantic import BaseModel, Field


class TrainConfig(BaseModel):
    batch_size: int = Field(default=128, ge=1)
    epochs: int = Field(default=300, ge=1)
    base_lr: float = Field(default=0.1, gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    weight_decay: float = Field(default=1e-4, ge=0)
    seed: int = Field(default=0, ge=0)
    eval_every: int = Field(default=1, ge=1, description="Validate every N epochs")
    augment: bool = Field(default=True, description="Pad-crop-flip training batches")
    prefetch: int = Field(default=1, ge=1, description="Queue depth of the batch producer")
    divergence_factor: float = Field(default=10.0, gt=1)
    divergence_patience: int = Field(default=3, ge=1)
