"""Layer description, weight blocks and parameter accounting for HGC layers."""

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Sequence

import numpy as np

from ..core.exceptions import DivisibilityError, ShapeError
from ..engine.tensor import DTYPE, ConvWeights


@dataclass(frozen=True)
class HgcLayerSpec:
    """One hierarchical group convolution: I input channels, O outputs, G groups."""

    in_channels: int
    out_channels: int
    groups: int

    def __post_init__(self) -> None:
        for name in ("in_channels", "out_channels", "groups"):
            if getattr(self, name) < 1:
                raise DivisibilityError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.in_channels % self.groups:
            raise DivisibilityError(
                f"in_channels {self.in_channels} not divisible by groups {self.groups}"
            )
        if self.out_channels % self.groups:
            raise DivisibilityError(
                f"out_channels {self.out_channels} not divisible by groups {self.groups}"
            )

    @property
    def in_per_group(self) -> int:
        return self.in_channels // self.groups

    @property
    def out_per_group(self) -> int:
        return self.out_channels // self.groups

    def block_shape(self, index: int) -> tuple:
        """Shape of weight block `index` (0-based)."""
        extra = 0 if index == 0 else self.out_per_group
        return (self.out_per_group, self.in_per_group + extra, 1, 1)


class HgcWeights:
    """The G weight blocks of an HGC layer.

    Block 0 maps X_1 (I/G channels); block i >= 1 maps concat(X_i, Y_{i-1}),
    i.e. I/G input channels followed by O/G channels of the previous output.
    """

    def __init__(self, spec: HgcLayerSpec, blocks: Sequence[ConvWeights]):
        if len(blocks) != spec.groups:
            raise ShapeError(f"expected {spec.groups} weight blocks, got {len(blocks)}")
        for index, block in enumerate(blocks):
            expected = spec.block_shape(index)
            if block.data.shape != expected:
                raise ShapeError(
                    f"weight block {index} has shape {block.data.shape}, expected {expected}"
                )
            if block.groups != 1:
                raise ShapeError(f"weight block {index} must be ungrouped, got {block.groups}")
        self.spec = spec
        self.blocks: List[ConvWeights] = list(blocks)

    def __iter__(self) -> Iterator[ConvWeights]:
        return iter(self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def scalar_count(self) -> int:
        return sum(block.scalar_count for block in self.blocks)

    @classmethod
    def from_arrays(cls, spec: HgcLayerSpec, arrays: Sequence[np.ndarray]) -> "HgcWeights":
        return cls(spec, [ConvWeights(np.asarray(array)) for array in arrays])

    @classmethod
    def initialize(
        cls, spec: HgcLayerSpec, rng: np.random.Generator, dtype: np.dtype = DTYPE
    ) -> "HgcWeights":
        blocks = []
        for index in range(spec.groups):
            out, fan_in = spec.block_shape(index)[:2]
            blocks.append(ConvWeights.initialize(rng, out, fan_in, dtype=dtype))
        return cls(spec, blocks)


@dataclass(frozen=True)
class CompressionRatio:
    """HGC parameters over the dense I*O equivalent.

    `exact` is the true ratio, `approx` the I = O simplification
    (2/G)(1 - 1/G) + 1/G^2, and `closed_form` the expanded expression
    (O/(I*G) + 1/G)(1 - 1/G) + 1/G^2, which always equals `exact`.
    """

    exact: Fraction
    approx: float
    closed_form: Fraction


def hgc_param_count(spec: HgcLayerSpec) -> int:
    """(O/G)(I/G) + (G-1)(O/G)(O/G + I/G)."""
    o, i, g = spec.out_per_group, spec.in_per_group, spec.groups
    return o * i + (g - 1) * o * (o + i)


def sgc_param_count(spec: HgcLayerSpec) -> int:
    return spec.in_channels * spec.out_channels // spec.groups


def hgc_overhead(spec: HgcLayerSpec) -> int:
    """Extra parameters of HGC over standard group convolution: (G-1) O^2 / G^2."""
    return hgc_param_count(spec) - sgc_param_count(spec)


def compression_ratio(spec: HgcLayerSpec) -> CompressionRatio:
    i, o, g = spec.in_channels, spec.out_channels, spec.groups
    inv_g = Fraction(1, g)
    exact = Fraction(hgc_param_count(spec), i * o)
    approx = (2.0 / g) * (1.0 - 1.0 / g) + 1.0 / g**2
    closed_form = (Fraction(o, i * g) + inv_g) * (1 - inv_g) + inv_g**2
    return CompressionRatio(exact=exact, approx=approx, closed_form=closed_form)
