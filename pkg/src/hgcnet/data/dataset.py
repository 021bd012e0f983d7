"""In-memory image datasets and per-channel normalization statistics."""

from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from ..core.exceptions import DataFormatError
from ..engine.tensor import DTYPE


@dataclass
class Dataset:
    """Images (N, C, H, W) in [0, 1] before normalization, with integer labels."""

    images: np.ndarray
    labels: np.ndarray
    class_count: int
    split: str = "train"

    def __post_init__(self) -> None:
        self.images = np.asarray(self.images, dtype=DTYPE)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise DataFormatError(f"images must be (N, C, H, W), got shape {self.images.shape}")
        if len(self.images) == 0:
            raise DataFormatError(f"{self.split} split is empty")
        if self.labels.shape != (len(self.images),):
            raise DataFormatError(
                f"{len(self.labels)} labels for {len(self.images)} images in {self.split} split"
            )
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise DataFormatError(
                f"labels of {self.split} split must lie in [0, {self.class_count}), "
                f"got [{self.labels.min()}, {self.labels.max()}]"
            )

    def __len__(self) -> int:
        return len(self.images)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)


@dataclass
class NormStats:
    """Per-channel mean and standard deviation of a training split."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "NormStats":
        images = dataset.images.astype(np.float64)
        mean = images.mean(axis=(0, 2, 3))
        std = images.std(axis=(0, 2, 3))
        # Constant channels normalize to zero instead of dividing by zero.
        std = np.where(std > 1e-8, std, 1.0)
        return cls(mean.astype(DTYPE), std.astype(DTYPE))

    def apply(self, images: np.ndarray) -> np.ndarray:
        return ((images - self.mean[None, :, None, None]) / self.std[None, :, None, None]).astype(
            DTYPE
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NormStats":
        return cls(np.asarray(data["mean"], dtype=DTYPE), np.asarray(data["std"], dtype=DTYPE))
