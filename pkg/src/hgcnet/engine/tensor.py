"""Value types of the tensor engine: rank-4 tensors, parameters and conv weights."""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..core.exceptions import DivisibilityError, ShapeError

DTYPE = np.float32

# Names of the four tensor axes, used in diagnostics.
AXES = ("batch", "channels", "rows", "cols")


def check_tensor(x: np.ndarray, name: str = "x") -> np.ndarray:
    """Validate a (n, c, h, w) tensor and return it unchanged."""
    if not isinstance(x, np.ndarray):
        raise ShapeError(f"{name} must be a numpy array, got {type(x).__name__}")
    if x.ndim != 4:
        raise ShapeError(f"{name} must be rank 4 (n, c, h, w), got shape {x.shape}")
    for axis, size in zip(AXES, x.shape):
        if size < 1:
            raise ShapeError(f"{name} has empty {axis} dimension: shape {x.shape}")
    return x


def he_normal(
    rng: np.random.Generator, shape: Sequence[int], fan_in: int, dtype: np.dtype = DTYPE
) -> np.ndarray:
    """Fan-in scaled Gaussian, std = sqrt(2 / fan_in)."""
    std = np.sqrt(2.0 / fan_in)
    return (rng.standard_normal(tuple(shape)) * std).astype(dtype)


class Parameter:
    """A trainable value paired with its accumulated gradient."""

    def __init__(self, value: np.ndarray, decay: bool = True):
        self.value = value
        self.grad = np.zeros_like(value)
        # Weight decay applies to conv/linear weights only.
        self.decay = decay

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def size(self) -> int:
        return int(self.value.size)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.value)

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.value.shape:
            raise ShapeError(f"gradient shape {grad.shape} != parameter shape {self.value.shape}")
        self.grad = self.grad + grad.astype(self.grad.dtype, copy=False)

    def astype(self, dtype: np.dtype) -> "Parameter":
        copy = Parameter(self.value.astype(dtype), decay=self.decay)
        copy.grad = self.grad.astype(dtype)
        return copy

    def __repr__(self) -> str:
        return f"Parameter(shape={self.shape}, dtype={self.value.dtype}, decay={self.decay})"


@dataclass
class ConvWeights:
    """Convolution filters of shape (out, in_per_group, kh, kw) split into `groups`."""

    data: np.ndarray
    groups: int = 1
    bias: Optional[np.ndarray] = field(default=None)

    def __post_init__(self) -> None:
        if self.data.ndim != 4:
            raise ShapeError(f"conv weights must be rank 4, got shape {self.data.shape}")
        if self.groups < 1:
            raise DivisibilityError(f"groups must be >= 1, got {self.groups}")
        if self.out_channels % self.groups != 0:
            raise DivisibilityError(
                f"out_channels {self.out_channels} not divisible by groups {self.groups}"
            )
        if self.bias is not None and self.bias.shape != (self.out_channels,):
            raise ShapeError(
                f"bias length {self.bias.shape} does not match out_channels {self.out_channels}"
            )

    @property
    def out_channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def in_channels_per_group(self) -> int:
        return int(self.data.shape[1])

    @property
    def in_channels(self) -> int:
        return self.in_channels_per_group * self.groups

    @property
    def kernel_h(self) -> int:
        return int(self.data.shape[2])

    @property
    def kernel_w(self) -> int:
        return int(self.data.shape[3])

    @property
    def scalar_count(self) -> int:
        count = int(self.data.size)
        if self.bias is not None:
            count += int(self.bias.size)
        return count

    @classmethod
    def initialize(
        cls,
        rng: np.random.Generator,
        out_channels: int,
        in_channels: int,
        kernel: int = 1,
        groups: int = 1,
        dtype: np.dtype = DTYPE,
    ) -> "ConvWeights":
        if in_channels % groups != 0:
            raise DivisibilityError(f"in_channels {in_channels} not divisible by groups {groups}")
        per_group = in_channels // groups
        shape = (out_channels, per_group, kernel, kernel)
        return cls(he_normal(rng, shape, per_group * kernel * kernel, dtype), groups=groups)
