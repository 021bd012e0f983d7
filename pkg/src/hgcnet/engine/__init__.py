"""Minimal numpy tensor engine: kernels, layers and gradient checking."""

from .gradcheck import GradCheckReport, grad_check, relative_error
from .layers import (
    AvgPool2x2,
    BatchNorm2d,
    ChannelShuffle,
    Conv2d,
    DepthwiseConv3x3,
    Flatten,
    GlobalAvgPool,
    Layer,
    Linear,
    ReLU,
    Sequential,
    Sigmoid,
)
from .tensor import DTYPE, ConvWeights, Parameter, check_tensor, he_normal

__all__ = [
    "AvgPool2x2",
    "BatchNorm2d",
    "ChannelShuffle",
    "Conv2d",
    "ConvWeights",
    "DTYPE",
    "DepthwiseConv3x3",
    "Flatten",
    "GlobalAvgPool",
    "GradCheckReport",
    "Layer",
    "Linear",
    "Parameter",
    "ReLU",
    "Sequential",
    "Sigmoid",
    "check_tensor",
    "grad_check",
    "he_normal",
    "relative_error",
]
