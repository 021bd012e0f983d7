"""Training protocol: schedule, optimizer, augmentation, loops and metrics."""

from .augment import CENTER, AugmentParams, augment, augment_batch, draw_augment_params
from .config import TrainConfig
from .metrics import EpochRecord, Metrics, MetricsExporter, top1_error
from .optimizer import SGD, sgd_nesterov_step
from .schedule import cosine_lr
from .trainer import Trainer, evaluate, prefetched, train

__all__ = [
    "AugmentParams",
    "CENTER",
    "EpochRecord",
    "Metrics",
    "MetricsExporter",
    "SGD",
    "TrainConfig",
    "Trainer",
    "augment",
    "augment_batch",
    "cosine_lr",
    "draw_augment_params",
    "evaluate",
    "prefetched",
    "sgd_nesterov_step",
    "top1_error",
    "train",
]
