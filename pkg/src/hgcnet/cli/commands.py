"""Subcommand implementations. Each returns a process exit code."""

import csv
import sys
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..blocks.modules import VARIANTS, HgcModuleSpec, build_module
from ..blocks.se import SEBlock
from ..core.exceptions import ConfigurationError, ValidationError
from ..data.checkpoint import apply_checkpoint, load_checkpoint
from ..data.config import load_datasets
from ..data.dataset import NormStats
from ..engine.gradcheck import GradCheckReport, grad_check
from ..engine.layers import (
    AvgPool2x2,
    BatchNorm2d,
    ChannelShuffle,
    Conv2d,
    DepthwiseConv3x3,
    GlobalAvgPool,
    Layer,
    Linear,
    ReLU,
    Sigmoid,
)
from ..hgc.layers import GroupConv1x1, HierarchicalGroupConv
from ..netbuilder.analyzer import (
    analyze,
    analyze_layer,
    compare_variants,
    format_comparison,
    format_report,
    write_comparison_csv,
    write_layer_ratio_csv,
    write_report_csv,
)
from ..netbuilder.network import build_network
from ..netbuilder.spec import NetworkSpec
from ..training.metrics import Metrics
from ..training.trainer import Trainer, evaluate
from .run_config import RunConfig

logger = structlog.get_logger(__name__)


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


# --- analyze ---


def cmd_analyze(cfg: RunConfig, sweep_groups: Optional[Sequence[int]] = None) -> int:
    out = cfg.out_path
    out.mkdir(parents=True, exist_ok=True)
    try:
        if cfg.layer is not None:
            layer = cfg.layer
            report = analyze_layer(
                layer.kind,
                layer.in_channels,
                layer.out_channels,
                layer.groups,
                layer.height,
                layer.width,
            )
        else:
            report = analyze(cfg.net)
        rows = compare_variants(cfg.net, sweep_groups) if sweep_groups else None
    except ValidationError as e:
        raise ConfigurationError(f"cannot analyze: {e}") from e

    text = format_report(report)
    (out / "report.txt").write_text(text, encoding="utf-8")
    write_report_csv(report, out / "report.csv")
    _emit(text)
    if rows is not None:
        sweep = format_comparison(rows)
        (out / "sweep.txt").write_text(sweep, encoding="utf-8")
        write_comparison_csv(rows, out / "sweep.csv")
        write_layer_ratio_csv(rows, out / "sweep_layers.csv")
        _emit("\n" + sweep)
    logger.info("analysis_written", out_dir=str(out), params=report.total_params)
    return 0


# --- train / eval ---


def cmd_train(cfg: RunConfig) -> int:
    cfg.check_paths()
    train_set, val_set = load_datasets(cfg.data, seed=cfg.seed)
    model = build_network(cfg.net, seed=cfg.seed)
    trainer = Trainer(model, train_set, cfg.train, val_set=val_set, out_dir=cfg.out_path)
    if cfg.checkpoint:
        trainer.resume(load_checkpoint(cfg.checkpoint))
    metrics = trainer.fit()
    last = metrics.last
    if last is not None:
        _emit(
            f"epochs={len(metrics.records)} train_loss={last.train_loss:.4f} "
            f"train_top1={last.train_top1:.2f}% val_top1="
            f"{'n/a' if last.val_top1 is None else f'{last.val_top1:.2f}%'}\n"
        )
    return 0


EVAL_HEADER = ["split", "samples", "loss", "top1_error"]


def cmd_eval(cfg: RunConfig) -> int:
    """Evaluate a checkpoint (or a freshly initialized network) on the validation split."""
    cfg.check_paths()
    train_set, val_set = load_datasets(cfg.data, seed=cfg.seed)
    if val_set.class_count != cfg.net.num_classes:
        raise ConfigurationError(
            f"net.num_classes={cfg.net.num_classes} but the data has {val_set.class_count} classes"
        )
    model = build_network(cfg.net, seed=cfg.seed)
    norm = None
    if cfg.checkpoint:
        checkpoint = load_checkpoint(cfg.checkpoint)
        apply_checkpoint(checkpoint, model)
        if "norm" in checkpoint.metadata:
            norm = NormStats.from_dict(checkpoint.metadata["norm"])
    norm = norm or NormStats.from_dataset(train_set)
    loss, error = evaluate(model, val_set, batch_size=cfg.train.batch_size, norm=norm)

    out = cfg.out_path
    out.mkdir(parents=True, exist_ok=True)
    with (out / "eval.csv").open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(EVAL_HEADER)
        writer.writerow([val_set.split, len(val_set), repr(loss), repr(error)])
    logger.info("evaluation_completed", loss=loss, top1_error=error, samples=len(val_set))
    _emit(f"loss={loss:.4f} top1_error={error:.2f}%\n")
    return 0


# --- gradcheck ---


class GradCase(NamedTuple):
    name: str
    build: Callable[[np.random.Generator], Layer]
    input_shape: Tuple[int, ...]
    classes: Optional[int] = None


def gradcheck_cases() -> List[GradCase]:
    """Every op with a backward pass, the module variants and a tiny network."""
    module = HgcModuleSpec(in_channels=8, growth_rate=4, groups=2)
    cases = [
        GradCase("conv2d", lambda rng: Conv2d(4, 6, kernel=3, pad=1, rng=rng), (2, 4, 5, 5)),
        GradCase(
            "conv2d_grouped_stride2",
            lambda rng: Conv2d(4, 6, kernel=3, stride=2, pad=1, groups=2, rng=rng),
            (2, 4, 5, 5),
        ),
        GradCase("depthwise3x3", lambda rng: DepthwiseConv3x3(4, rng=rng), (2, 4, 5, 5)),
        GradCase(
            "depthwise3x3_stride2",
            lambda rng: DepthwiseConv3x3(4, stride=2, rng=rng),
            (2, 4, 6, 6),
        ),
        GradCase("channel_shuffle", lambda rng: ChannelShuffle(2), (2, 6, 3, 3)),
        GradCase("batchnorm", lambda rng: BatchNorm2d(4), (3, 4, 3, 3)),
        GradCase("relu", lambda rng: ReLU(), (2, 4, 3, 3)),
        GradCase("sigmoid", lambda rng: Sigmoid(), (2, 4, 3, 3)),
        GradCase("global_avg_pool", lambda rng: GlobalAvgPool(), (2, 4, 3, 3)),
        GradCase("avg_pool2x2", lambda rng: AvgPool2x2(), (2, 4, 4, 4)),
        GradCase("linear", lambda rng: Linear(6, 5, rng=rng), (3, 6), classes=5),
        GradCase("hgc", lambda rng: HierarchicalGroupConv(8, 8, 4, rng=rng), (2, 8, 3, 3)),
        GradCase("sgc", lambda rng: GroupConv1x1(8, 8, 4, rng=rng), (2, 8, 3, 3)),
        GradCase("se_block", lambda rng: SEBlock(8, 4, rng=rng), (2, 8, 3, 3)),
    ]
    for variant in VARIANTS:
        cases.append(
            GradCase(
                f"module_{variant}",
                lambda rng, v=variant: build_module(v, module, rng=rng),
                (2, 8, 4, 4),
            )
        )
    cases.append(
        GradCase(
            "module_hgc_se",
            lambda rng: build_module("hgc", HgcModuleSpec(8, 4, groups=2, use_se=True), rng=rng),
            (2, 8, 4, 4),
        )
    )
    tiny = NetworkSpec.from_preset("tiny", image_size=8, zero_init_head=False)
    cases.append(
        GradCase(
            "network_tiny",
            lambda rng: build_network(tiny, seed=int(rng.integers(2**31))),
            (2, 3, 8, 8),
            classes=tiny.num_classes,
        )
    )
    return cases


GRADCHECK_HEADER = ["op", "max_relative_error", "worst_tensor", "checked", "rejected", "passed"]


def run_gradchecks(seed: int = 0) -> List[Tuple[str, GradCheckReport]]:
    rng = np.random.default_rng(seed)
    results = []
    for case in gradcheck_cases():
        layer = case.build(rng)
        x = rng.standard_normal(case.input_shape)
        labels = rng.integers(0, case.classes, size=case.input_shape[0]) if case.classes else None
        report = grad_check(layer, x, labels=labels, seed=seed)
        logger.debug("op_checked", op=case.name, error=report.max_relative_error)
        results.append((case.name, report))
    return results


def cmd_gradcheck(cfg: RunConfig) -> int:
    results = run_gradchecks(cfg.seed)
    out = cfg.out_path
    out.mkdir(parents=True, exist_ok=True)
    rows = [
        [
            name,
            f"{r.max_relative_error:.3e}",
            r.worst_tensor or "",
            r.checked,
            r.rejected,
            "yes" if r.passed else "NO",
        ]
        for name, r in results
    ]
    with (out / "gradcheck.csv").open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(GRADCHECK_HEADER)
        writer.writerows(rows)
    width = max(len(name) for name, _ in results)
    lines = [f"{row[0].ljust(width)}  {row[1]:>10}  {row[5]}" for row in rows]
    _emit("\n".join(lines) + "\n")
    failed = [name for name, r in results if not r.passed]
    if failed:
        logger.error("gradcheck_failed", ops=failed)
        return 1
    logger.info("gradcheck_passed", ops=len(results))
    return 0


# --- ablate ---

ABLATION_VARIANTS = ("hgc", "sgc")


def _ablation_rows(streams: Sequence[Metrics]) -> List[List[str]]:
    rows = []
    for records in zip(*(s.records for s in streams)):
        row = [str(records[0].epoch), repr(records[0].lr)]
        for r in records:
            row += [
                repr(r.train_loss),
                repr(r.train_top1),
                "" if r.val_loss is None else repr(r.val_loss),
                "" if r.val_top1 is None else repr(r.val_top1),
            ]
        rows.append(row)
    return rows


def cmd_ablate(cfg: RunConfig) -> int:
    """Train HGC and SGC networks with identical seeds, data and schedule."""
    cfg.check_paths()
    train_set, val_set = load_datasets(cfg.data, seed=cfg.seed)
    out = cfg.out_path
    out.mkdir(parents=True, exist_ok=True)
    streams = []
    params = {}
    for variant in ABLATION_VARIANTS:
        spec = cfg.net.model_copy(update={"variant": variant})
        model = build_network(spec, seed=cfg.seed)
        params[variant] = model.parameter_count()
        trainer = Trainer(
            model, train_set, cfg.train, val_set=val_set, out_dir=out / variant, run=variant
        )
        metrics = trainer.fit()
        metrics.write_csv(out / f"metrics_{variant}.csv")
        streams.append(metrics)

    header = ["epoch", "lr"]
    for variant in ABLATION_VARIANTS:
        header += [f"{variant}_{c}" for c in ("train_loss", "train_top1", "val_loss", "val_top1")]
    with (out / "ablation.csv").open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(_ablation_rows(streams))

    for variant, metrics in zip(ABLATION_VARIANTS, streams):
        last = metrics.last
        val = "n/a" if last is None or last.val_top1 is None else f"{last.val_top1:.2f}%"
        _emit(f"{variant}: params={params[variant]} epochs={len(metrics.records)} val_top1={val}\n")
    logger.info("ablation_completed", out_dir=str(out), params=params)
    return 0

