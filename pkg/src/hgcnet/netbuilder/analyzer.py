"""Static parameter and FLOP accounting for HGCNet specs.

Counts mirror the layers `build_network` instantiates, so a report's total
equals the instantiated network's scalar count. FLOPs are multiply-accumulates
(1 MAC = 1 FLOP): conv params x output pixels, one MAC per element for
batchnorm, in x out for linear layers. Pooling and ReLU are free.
"""

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import structlog

from ..core.exceptions import ValidationError
from ..hgc.spec import HgcLayerSpec, hgc_param_count, sgc_param_count
from .spec import NetworkSpec

logger = structlog.get_logger(__name__)

LAYER_KINDS = ("hgc", "sgc", "dense", "depthwise")
REDUCTION_KINDS = {"hgc": "hgc", "sgc": "sgc", "bottleneck": "dense"}
CSV_HEADER = ["layer", "params", "flops"]


@dataclass
class LayerRecord:
    name: str
    kind: str
    in_channels: int
    out_channels: int
    groups: int
    params: int
    flops: int
    # Parameters of the dense I x O 1x1 equivalent, for 1x1 reductions only.
    dense_params: Optional[int] = None

    @property
    def ratio(self) -> Optional[Fraction]:
        if not self.dense_params:
            return None
        return Fraction(self.params, self.dense_params)


@dataclass
class ParamReport:
    title: str
    records: List[LayerRecord] = field(default_factory=list)
    preset: Optional[str] = None

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.records)

    @property
    def total_flops(self) -> int:
        return sum(r.flops for r in self.records)

    @property
    def params_m(self) -> float:
        return self.total_params / 1e6

    @property
    def flops_m(self) -> float:
        return self.total_flops / 1e6

    @property
    def reductions(self) -> List[LayerRecord]:
        return [r for r in self.records if r.dense_params]

    @property
    def compression_ratio(self) -> Optional[Fraction]:
        """Parameters of all 1x1 reductions over their dense equivalents."""
        dense = sum(r.dense_params or 0 for r in self.reductions)
        if not dense:
            return None
        return Fraction(sum(r.params for r in self.reductions), dense)

    @property
    def uses_preset(self) -> bool:
        return self.preset is not None


@dataclass
class LayerPair:
    """One 1x1 reduction counted under both grouping schemes."""

    name: str
    in_channels: int
    out_channels: int
    hgc_params: int
    sgc_params: int

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.hgc_params, self.sgc_params)


@dataclass
class VariantRow:
    groups: int
    hgc_params: int
    hgc_flops: int
    sgc_params: int
    sgc_flops: int
    dense_params: int
    layers: List[LayerPair] = field(default_factory=list)

    @property
    def param_ratio(self) -> float:
        return self.hgc_params / self.sgc_params


def _reduction_params(kind: str, in_channels: int, out_channels: int, groups: int) -> int:
    if kind == "dense":
        return in_channels * out_channels
    spec = HgcLayerSpec(in_channels, out_channels, groups)
    return hgc_param_count(spec) if kind == "hgc" else sgc_param_count(spec)


def _conv(name: str, kind: str, i: int, o: int, g: int, params: int, pixels: int) -> LayerRecord:
    dense = i * o if kind in ("hgc", "sgc", "dense") else None
    return LayerRecord(name, kind, i, o, g, params, params * pixels, dense_params=dense)


def _norm(name: str, channels: int, pixels: int) -> LayerRecord:
    return LayerRecord(name, "batchnorm", channels, channels, 1, 2 * channels, channels * pixels)


def analyze_layer(
    kind: str, in_channels: int, out_channels: int, groups: int, height: int, width: int
) -> ParamReport:
    """Report for a single layer: 1x1 hgc / sgc / dense, or a 3x3 depthwise."""
    if kind not in LAYER_KINDS:
        raise ValidationError(f"unknown layer kind {kind!r}, expected one of {LAYER_KINDS}")
    pixels = height * width
    if kind == "depthwise":
        if in_channels != out_channels:
            raise ValidationError("depthwise layers keep their channel count")
        params = 9 * in_channels
        record = LayerRecord(
            kind, kind, in_channels, out_channels, in_channels, params, params * pixels
        )
    else:
        params = _reduction_params(kind, in_channels, out_channels, groups)
        record = _conv(kind, kind, in_channels, out_channels, groups, params, pixels)
    return ParamReport(
        title=f"{kind} {in_channels}->{out_channels} G={groups} on {height}x{width}",
        records=[record],
    )


def analyze(spec: NetworkSpec) -> ParamReport:
    """Per-layer parameters and FLOPs of the network `spec` describes."""
    report = ParamReport(
        title=f"{spec.variant} depth={spec.depth} G={spec.groups} stages={spec.stages_text}",
        preset=spec.preset,
    )
    records = report.records
    size = spec.image_size
    stem_params = 9 * spec.in_channels * spec.stem_channels
    records.append(
        LayerRecord(
            "stem", "conv3x3", spec.in_channels, spec.stem_channels, 1,
            stem_params, stem_params * size * size,
        )
    )
    reduction_kind = REDUCTION_KINDS[spec.variant]
    current_stage = 1
    for placement in spec.module_placements():
        if placement.stage != current_stage:
            current_stage = placement.stage
            size //= 2
        module, pixels, prefix = placement.spec, size * size, placement.name
        i, b, g = module.in_channels, module.bottleneck_width, module.growth_rate
        records.append(_norm(f"{prefix}.norm_in", i, pixels))
        reduce_params = _reduction_params(reduction_kind, i, b, module.groups)
        records.append(
            _conv(f"{prefix}.reduce", reduction_kind, i, b, module.groups, reduce_params, pixels)
        )
        records.append(_norm(f"{prefix}.norm_mid", b, pixels))
        records.append(_conv(f"{prefix}.depthwise", "depthwise", b, b, b, 9 * b, pixels))
        records.append(_conv(f"{prefix}.pointwise", "conv1x1", b, g, 1, b * g, pixels))
        records.append(_norm(f"{prefix}.norm_out", g, pixels))
        if module.use_se:
            hidden = g // module.se_reduction
            params = (g * hidden + hidden) + (hidden * g + g)
            records.append(
                LayerRecord(f"{prefix}.se", "se", g, g, 1, params, 2 * g * hidden + g * pixels)
            )
    features = spec.feature_channels
    records.append(_norm("norm", features, size * size))
    records.append(
        LayerRecord(
            "classifier", "linear", features, spec.num_classes, 1,
            features * spec.num_classes + spec.num_classes, features * spec.num_classes,
        )
    )
    logger.debug(
        "network_analyzed",
        variant=spec.variant,
        groups=spec.groups,
        params=report.total_params,
        flops=report.total_flops,
    )
    return report


def compare_variants(spec: NetworkSpec, groups_list: Iterable[int]) -> List[VariantRow]:
    """HGC vs SGC totals of `spec` for each group count.

    Each row also pairs up the 1x1 reductions of both networks, layer by layer.
    """
    dense = analyze(spec.model_copy(update={"variant": "bottleneck"}))
    rows = []
    for groups in groups_list:
        hgc = analyze(spec.model_copy(update={"variant": "hgc", "groups": groups}))
        sgc = analyze(spec.model_copy(update={"variant": "sgc", "groups": groups}))
        rows.append(
            VariantRow(
                groups=groups,
                hgc_params=hgc.total_params,
                hgc_flops=hgc.total_flops,
                sgc_params=sgc.total_params,
                sgc_flops=sgc.total_flops,
                dense_params=dense.total_params,
                layers=[
                    LayerPair(h.name, h.in_channels, h.out_channels, h.params, s.params)
                    for h, s in zip(hgc.reductions, sgc.reductions)
                ],
            )
        )
    return rows


# --- Rendering ---


def _table(header: Sequence[str], rows: Sequence[Sequence[object]]) -> List[str]:
    cells = [list(map(str, header))] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = []
    for index, row in enumerate(cells):
        first = row[0].ljust(widths[0])
        rest = [cell.rjust(width) for cell, width in zip(row[1:], widths[1:])]
        lines.append("  ".join([first] + rest))
        if index == 0:
            lines.append("  ".join("-" * width for width in widths))
    return lines


def format_report(report: ParamReport) -> str:
    rows = [[r.name, r.kind, r.params, r.flops] for r in report.records]
    rows.append(["total", "", report.total_params, report.total_flops])
    lines = [report.title, ""]
    lines += _table(["layer", "kind", "params", "flops"], rows)
    lines.append("")
    lines.append(f"params: {report.params_m:.4f}M  flops: {report.flops_m:.2f}M (1 MAC = 1 FLOP)")
    ratio = report.compression_ratio
    if ratio is not None:
        lines.append(f"1x1 compression ratio vs dense: {ratio} = {float(ratio):.4f}")
    if report.uses_preset:
        lines.append(f"preset {report.preset!r}: calibrated widths, not published ones")
    return "\n".join(lines) + "\n"


def write_report_csv(report: ParamReport, path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for r in report.records:
            writer.writerow([r.name, r.params, r.flops])
        writer.writerow(["total", report.total_params, report.total_flops])


COMPARISON_HEADER = ["groups", "hgc_params", "sgc_params", "hgc_flops", "sgc_flops", "param_ratio"]


def _comparison_rows(rows: Sequence[VariantRow]) -> List[List[object]]:
    return [
        [r.groups, r.hgc_params, r.sgc_params, r.hgc_flops, r.sgc_flops, f"{r.param_ratio:.4f}"]
        for r in rows
    ]


def format_comparison(rows: Sequence[VariantRow]) -> str:
    lines = _table(COMPARISON_HEADER, _comparison_rows(rows))
    if rows:
        lines.append("")
        lines.append(f"dense bottleneck reference: {rows[0].dense_params} params")
        lines += ["", "hgc / sgc params per 1x1 reduction", ""]
        header = ["layer", "in", "out"] + [f"G={r.groups}" for r in rows]
        table = [
            [pair.name, pair.in_channels, pair.out_channels]
            + [f"{float(r.layers[index].ratio):.4f}" for r in rows]
            for index, pair in enumerate(rows[0].layers)
        ]
        lines += _table(header, table)
    return "\n".join(lines) + "\n"


def write_comparison_csv(rows: Sequence[VariantRow], path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(COMPARISON_HEADER)
        writer.writerows(_comparison_rows(rows))


LAYER_RATIO_HEADER = ["groups", "layer", "in", "out", "hgc_params", "sgc_params", "ratio"]


def write_layer_ratio_csv(rows: Sequence[VariantRow], path: Union[str, Path]) -> None:
    """One line per (group count, 1x1 reduction); the ratio is exact, e.g. 7/4."""
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(LAYER_RATIO_HEADER)
        for r in rows:
            for pair in r.layers:
                writer.writerow(
                    [
                        r.groups, pair.name, pair.in_channels, pair.out_channels,
                        pair.hgc_params, pair.sgc_params, str(pair.ratio),
                    ]
                )
