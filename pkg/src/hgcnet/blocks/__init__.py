"""Composite building blocks: HGC/SGC/bottleneck modules and the SE block."""

from .modules import (
    MODULE_TYPES,
    VARIANTS,
    BottleneckModule,
    CompactModule,
    HgcModule,
    HgcModuleSpec,
    SgcModule,
    build_module,
)
from .se import SEBlock

__all__ = [
    "BottleneckModule",
    "CompactModule",
    "HgcModule",
    "HgcModuleSpec",
    "MODULE_TYPES",
    "SEBlock",
    "SgcModule",
    "VARIANTS",
    "build_module",
]
