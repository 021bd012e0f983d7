"""Hierarchical group convolution: recurrence, accounting and the SGC baseline."""

from .layers import (
    GroupConv1x1,
    HgcCache,
    HierarchicalGroupConv,
    hgc_backward,
    hgc_forward,
    sgc_forward,
)
from .spec import (
    CompressionRatio,
    HgcLayerSpec,
    HgcWeights,
    compression_ratio,
    hgc_overhead,
    hgc_param_count,
    sgc_param_count,
)

__all__ = [
    "CompressionRatio",
    "GroupConv1x1",
    "HgcCache",
    "HgcLayerSpec",
    "HgcWeights",
    "HierarchicalGroupConv",
    "compression_ratio",
    "hgc_backward",
    "hgc_forward",
    "hgc_overhead",
    "hgc_param_count",
    "sgc_forward",
    "sgc_param_count",
]
