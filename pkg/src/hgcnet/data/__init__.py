"""Datasets (CIFAR binary, synthetic), normalization and checkpoints."""

from .checkpoint import (
    Checkpoint,
    apply_checkpoint,
    capture_checkpoint,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from .cifar import load_cifar, read_cifar_file
from .config import DataConfig, load_datasets
from .dataset import Dataset, NormStats
from .synthetic import synth_dataset

__all__ = [
    "Checkpoint",
    "DataConfig",
    "Dataset",
    "NormStats",
    "apply_checkpoint",
    "capture_checkpoint",
    "decode_checkpoint",
    "encode_checkpoint",
    "load_checkpoint",
    "load_cifar",
    "load_datasets",
    "read_cifar_file",
    "save_checkpoint",
    "synth_dataset",
]
