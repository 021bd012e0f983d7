"""The HGC module, its SGC ablation variant and the dense bottleneck baseline.

All three share one pipeline and differ only in the 1x1 reduction:

    BN -> ReLU -> [shuffle(G)] -> 1x1 reduce (in -> B) -> BN
       -> depthwise 3x3 -> pointwise 1x1 (B -> g) -> BN -> ReLU -> [SE]

No ReLU sits between the reduction BN and the depthwise convolution.
"""

from dataclasses import dataclass
from typing import ClassVar, Dict, Optional, Type

import numpy as np

from ..core.exceptions import DivisibilityError, ValidationError
from ..engine.layers import (
    BatchNorm2d,
    ChannelShuffle,
    Conv2d,
    DepthwiseConv3x3,
    Layer,
    ReLU,
    Sequential,
)
from ..hgc.layers import GroupConv1x1, HierarchicalGroupConv
from .se import DEFAULT_SE_REDUCTION, SEBlock

DEFAULT_BOTTLENECK_FACTOR = 4
VARIANTS = ("hgc", "sgc", "bottleneck")


@dataclass(frozen=True)
class HgcModuleSpec:
    in_channels: int
    growth_rate: int
    groups: int = 1
    use_se: bool = False
    se_reduction: int = DEFAULT_SE_REDUCTION
    bottleneck_factor: int = DEFAULT_BOTTLENECK_FACTOR

    def __post_init__(self) -> None:
        if self.growth_rate < 1:
            raise ValidationError(f"growth_rate must be > 0, got {self.growth_rate}")
        if self.in_channels < 1 or self.groups < 1 or self.bottleneck_factor < 1:
            raise ValidationError(
                f"in_channels, groups and bottleneck_factor must be >= 1: {self}"
            )
        if self.in_channels % self.groups:
            raise DivisibilityError(
                f"module input channels {self.in_channels} not divisible by groups {self.groups}"
            )
        if self.bottleneck_width % self.groups:
            raise DivisibilityError(
                f"bottleneck width {self.bottleneck_width} not divisible by groups {self.groups}"
            )
        if self.use_se and (self.se_reduction < 1 or self.growth_rate % self.se_reduction):
            raise DivisibilityError(
                f"SE reduction {self.se_reduction} does not divide growth rate {self.growth_rate}"
            )

    @property
    def bottleneck_width(self) -> int:
        return self.bottleneck_factor * self.growth_rate


class CompactModule(Sequential):
    """Shared pipeline; subclasses choose the 1x1 reduction."""

    variant: ClassVar[str] = ""
    shuffles: ClassVar[bool] = True

    def __init__(self, spec: HgcModuleSpec, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.spec = spec
        width = spec.bottleneck_width
        self.add_child("norm_in", BatchNorm2d(spec.in_channels))
        self.add_child("relu_in", ReLU())
        if self.shuffles:
            self.add_child("shuffle", ChannelShuffle(spec.groups))
        self.add_child("reduce", self._reduction(spec, rng))
        self.add_child("norm_mid", BatchNorm2d(width))
        self.add_child("depthwise", DepthwiseConv3x3(width, rng=rng))
        self.add_child("pointwise", Conv2d(width, spec.growth_rate, rng=rng))
        self.add_child("norm_out", BatchNorm2d(spec.growth_rate))
        self.add_child("relu_out", ReLU())
        if spec.use_se:
            self.add_child("se", SEBlock(spec.growth_rate, spec.se_reduction, rng=rng))

    def _reduction(self, spec: HgcModuleSpec, rng: np.random.Generator) -> Layer:
        raise NotImplementedError


class HgcModule(CompactModule):
    variant = "hgc"

    def _reduction(self, spec: HgcModuleSpec, rng: np.random.Generator) -> Layer:
        return HierarchicalGroupConv(spec.in_channels, spec.bottleneck_width, spec.groups, rng=rng)


class SgcModule(CompactModule):
    """HGC module with standard group convolution; the shuffle stays."""

    variant = "sgc"

    def _reduction(self, spec: HgcModuleSpec, rng: np.random.Generator) -> Layer:
        return GroupConv1x1(spec.in_channels, spec.bottleneck_width, spec.groups, rng=rng)


class BottleneckModule(CompactModule):
    variant = "bottleneck"
    shuffles = False

    def _reduction(self, spec: HgcModuleSpec, rng: np.random.Generator) -> Layer:
        return Conv2d(spec.in_channels, spec.bottleneck_width, rng=rng)


MODULE_TYPES: Dict[str, Type[CompactModule]] = {
    cls.variant: cls for cls in (HgcModule, SgcModule, BottleneckModule)
}


def build_module(
    variant: str, spec: HgcModuleSpec, rng: Optional[np.random.Generator] = None
) -> CompactModule:
    try:
        module_type = MODULE_TYPES[variant]
    except KeyError:
        raise ValidationError(f"unknown module variant {variant!r}, expected one of {VARIANTS}")
    return module_type(spec, rng=rng)

