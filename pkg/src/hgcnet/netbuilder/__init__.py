"""HGCNet specs, presets, graph building and static cost analysis."""

from .analyzer import (
    LayerPair,
    LayerRecord,
    ParamReport,
    VariantRow,
    analyze,
    analyze_layer,
    compare_variants,
    format_comparison,
    format_report,
    write_comparison_csv,
    write_layer_ratio_csv,
    write_report_csv,
)
from .network import DenseStage, HgcNet, build_network
from .spec import ModulePlacement, NetworkSpec, StageSpec, load_presets, parse_stages, preset_names

__all__ = [
    "DenseStage",
    "HgcNet",
    "LayerPair",
    "LayerRecord",
    "ModulePlacement",
    "NetworkSpec",
    "ParamReport",
    "StageSpec",
    "VariantRow",
    "analyze",
    "analyze_layer",
    "build_network",
    "compare_variants",
    "format_comparison",
    "format_report",
    "load_presets",
    "parse_stages",
    "preset_names",
    "write_comparison_csv",
    "write_layer_ratio_csv",
    "write_report_csv",
]
