"""Cosine learning-rate schedule, stepped once per epoch from base_lr toward zero."""

import math

from ..core.exceptions import ValidationError
from .config import TrainConfig


def cosine_lr(epoch: int, cfg: TrainConfig) -> float:
    """0.5 * base_lr * (1 + cos(pi * epoch / epochs)), for 0 <= epoch < epochs."""
    if not 0 <= epoch < cfg.epochs:
        raise ValidationError(f"epoch {epoch} outside [0, {cfg.epochs})")
    return 0.5 * cfg.base_lr * (1.0 + math.cos(math.pi * epoch / cfg.epochs))
