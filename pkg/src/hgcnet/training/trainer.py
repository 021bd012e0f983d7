"""Train and evaluation loops with per-epoch metrics and checkpoints."""

import math
import queue
import threading
import time
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple, Union

import numpy as np
import structlog

from ..core.config import get_settings
from ..core.exceptions import CheckpointError, ConfigurationError, DivergenceError, TrainingError
from ..data.checkpoint import Checkpoint, apply_checkpoint, capture_checkpoint, save_checkpoint
from ..data.dataset import Dataset, NormStats
from ..engine import functional as F
from ..engine.layers import Layer
from .augment import augment_batch
from .config import TrainConfig
from .metrics import EpochRecord, Metrics, MetricsExporter, top1_error
from .optimizer import SGD
from .schedule import cosine_lr

logger = structlog.get_logger(__name__)

METRICS_FILE = "metrics.csv"
PROMETHEUS_FILE = "metrics.prom"
CHECKPOINT_FILE = "checkpoint.hgc"
EVAL_BATCH_SIZE = 256

Batch = Tuple[np.ndarray, np.ndarray]


def evaluate(
    model: Layer,
    dataset: Dataset,
    batch_size: int = EVAL_BATCH_SIZE,
    norm: Optional[NormStats] = None,
) -> Tuple[float, float]:
    """Mean loss and top-1 error (%) of `model` on `dataset`, using BN running stats.

    The model's train/eval mode is restored afterwards; nothing else changes.
    """
    was_training = model.training
    model.eval()
    loss_sum = 0.0
    correct = 0
    try:
        for start in range(0, len(dataset), batch_size):
            images = dataset.images[start : start + batch_size]
            labels = dataset.labels[start : start + batch_size]
            x = norm.apply(images) if norm is not None else images
            logits = model.forward(x)
            loss, _ = F.softmax_cross_entropy(logits, labels)
            loss_sum += loss * len(labels)
            correct += int((logits.argmax(axis=1) == labels).sum())
    finally:
        model.train(was_training)
    return loss_sum / len(dataset), top1_error(correct, len(dataset))


class _Failure:
    def __init__(self, error: BaseException):
        self.error = error


_DONE = object()


def prefetched(batches: Iterator[Batch], depth: int) -> Iterator[Batch]:
    """Run `batches` on a producer thread, `depth` batches ahead of the consumer.

    Order is preserved and producer exceptions are re-raised in the consumer.
    """
    slots: "queue.Queue[Any]" = queue.Queue(maxsize=depth)
    stop = threading.Event()

    def produce() -> None:
        try:
            for batch in batches:
                if stop.is_set():
                    return
                slots.put(batch)
        except BaseException as e:
            slots.put(_Failure(e))
            return
        slots.put(_DONE)

    producer = threading.Thread(target=produce, name="batch-producer", daemon=True)
    producer.start()
    try:
        while True:
            item = slots.get()
            if item is _DONE:
                break
            if isinstance(item, _Failure):
                raise item.error
            yield item
    finally:
        stop.set()
        while producer.is_alive():
            try:
                slots.get_nowait()
            except queue.Empty:
                pass
            producer.join(timeout=0.01)


class Trainer:
    """SGD/Nesterov training of a classifier under a cosine schedule.

    One generator seeded with `cfg.seed` drives batch order and augmentation.
    With an output directory, metrics and a checkpoint are written after
    every epoch; `resume` continues from such a checkpoint exactly.
    """

    def __init__(
        self,
        model: Layer,
        train_set: Dataset,
        cfg: TrainConfig,
        val_set: Optional[Dataset] = None,
        out_dir: Optional[Union[str, Path]] = None,
        norm: Optional[NormStats] = None,
        threads: Optional[int] = None,
        run: str = "train",
    ):
        classes = getattr(getattr(model, "spec", None), "num_classes", None)
        for dataset in (train_set, val_set):
            if dataset is not None and classes is not None and dataset.class_count != classes:
                raise ConfigurationError(
                    f"model predicts {classes} classes but the {dataset.split} split "
                    f"has {dataset.class_count}"
                )
        self.model = model
        self.train_set = train_set
        self.val_set = val_set
        self.cfg = cfg
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.norm = norm or NormStats.from_dataset(train_set)
        self.threads = get_settings().threads if threads is None else threads
        self.optimizer = SGD(model.named_parameters(), cfg.momentum, cfg.weight_decay)
        self.rng = np.random.default_rng(cfg.seed)
        self.metrics = Metrics()
        self.exporter = MetricsExporter(run)
        self.epoch = 0
        self.diverging_epochs = 0

    # --- batches ---

    def _batches(self) -> Iterator[Batch]:
        order = self.rng.permutation(len(self.train_set))
        for start in range(0, len(order), self.cfg.batch_size):
            index = order[start : start + self.cfg.batch_size]
            x = self.norm.apply(self.train_set.images[index])
            if self.cfg.augment:
                x = augment_batch(x, self.rng)
            yield x, self.train_set.labels[index]

    def batches(self) -> Iterator[Batch]:
        """One epoch of shuffled training batches."""
        if self.threads > 0:
            return prefetched(self._batches(), self.cfg.prefetch)
        return self._batches()

    # --- loops ---

    def train_epoch(self, epoch: int) -> EpochRecord:
        lr = cosine_lr(epoch, self.cfg)
        started = time.perf_counter()
        self.model.train()
        loss_sum = 0.0
        correct = 0
        seen = 0
        for x, labels in self.batches():
            self.optimizer.zero_grad()
            logits = self.model.forward(x)
            loss, dlogits = F.softmax_cross_entropy(logits, labels)
            if not math.isfinite(loss):
                logger.error("non_finite_loss", epoch=epoch, seen=seen)
                raise TrainingError(f"non-finite loss at epoch {epoch} after {seen} samples")
            self.model.backward(dlogits)
            self.optimizer.step(lr, epoch=epoch)
            loss_sum += loss * len(labels)
            correct += int((logits.argmax(axis=1) == labels).sum())
            seen += len(labels)

        val_loss: Optional[float] = None
        val_top1: Optional[float] = None
        last = epoch == self.cfg.epochs - 1
        if self.val_set is not None and ((epoch + 1) % self.cfg.eval_every == 0 or last):
            val_loss, val_top1 = evaluate(self.model, self.val_set, norm=self.norm)
        return EpochRecord(
            epoch=epoch,
            lr=lr,
            train_loss=loss_sum / seen,
            train_top1=top1_error(correct, seen),
            val_loss=val_loss,
            val_top1=val_top1,
            seconds=time.perf_counter() - started,
        )

    def fit(self, until: Optional[int] = None) -> Metrics:
        """Run epochs up to `until` (default: all of cfg.epochs).

        Raises:
            DivergenceError: train loss above divergence_factor x initial loss
                for divergence_patience consecutive epochs
            TrainingError: NaN/Inf loss or gradient
        """
        until = self.cfg.epochs if until is None else min(until, self.cfg.epochs)
        if self.metrics.initial_loss is None:
            self.metrics.initial_loss, _ = evaluate(self.model, self.train_set, norm=self.norm)
        logger.info(
            "training_started",
            start_epoch=self.epoch,
            epochs=self.cfg.epochs,
            samples=len(self.train_set),
            initial_loss=self.metrics.initial_loss,
            prefetch=self.threads > 0,
        )
        while self.epoch < until:
            record = self.train_epoch(self.epoch)
            self.metrics.append(record)
            self.exporter.record(record, samples=len(self.train_set))
            self.epoch += 1
            self._track_divergence(record)
            logger.info(
                "epoch_completed",
                epoch=record.epoch,
                lr=record.lr,
                train_loss=record.train_loss,
                train_top1=record.train_top1,
                val_loss=record.val_loss,
                val_top1=record.val_top1,
                seconds=round(record.seconds, 3),
            )
            self.write_outputs()
            if self.diverging_epochs >= self.cfg.divergence_patience:
                logger.error(
                    "training_diverged",
                    epoch=record.epoch,
                    train_loss=record.train_loss,
                    initial_loss=self.metrics.initial_loss,
                )
                raise DivergenceError(
                    f"train loss {record.train_loss:.4g} exceeded "
                    f"{self.cfg.divergence_factor}x the initial loss "
                    f"{self.metrics.initial_loss:.4g} for {self.diverging_epochs} epochs"
                )
        if self.epoch >= self.cfg.epochs:
            logger.info("training_completed", epochs=self.epoch)
        return self.metrics

    def _track_divergence(self, record: EpochRecord) -> None:
        limit = self.cfg.divergence_factor * (self.metrics.initial_loss or 0.0)
        if record.train_loss > limit:
            self.diverging_epochs += 1
        else:
            self.diverging_epochs = 0

    # --- persistence ---

    def checkpoint(self) -> Checkpoint:
        spec = getattr(self.model, "spec", None)
        metadata: Dict[str, Any] = {
            "epoch": self.epoch,
            "spec": spec.model_dump(mode="json") if spec is not None else None,
            "rng_state": self.rng.bit_generator.state,
            "norm": self.norm.to_dict(),
            "metrics": self.metrics.to_dict(),
            "trainer": {
                "diverging_epochs": self.diverging_epochs,
                "train": self.cfg.model_dump(mode="json"),
            },
        }
        return capture_checkpoint(self.model, self.optimizer.velocity, metadata)

    def write_outputs(self) -> None:
        if self.out_dir is None:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.metrics.write_csv(self.out_dir / METRICS_FILE)
        self.exporter.write(self.out_dir / PROMETHEUS_FILE)
        save_checkpoint(self.out_dir / CHECKPOINT_FILE, self.checkpoint())

    def resume(self, checkpoint: Checkpoint) -> None:
        """Restore weights, velocities, RNG, normalization, metrics and counters."""
        meta = checkpoint.metadata
        for key in ("epoch", "rng_state", "norm", "metrics"):
            if key not in meta:
                raise CheckpointError(f"checkpoint metadata lacks {key!r}; cannot resume")
        spec = getattr(self.model, "spec", None)
        if spec is not None and meta.get("spec") not in (None, spec.model_dump(mode="json")):
            logger.warning("checkpoint_spec_differs", stored=meta.get("spec"))
        velocities = apply_checkpoint(checkpoint, self.model)
        self.optimizer.load_velocity(velocities)
        self.rng.bit_generator.state = meta["rng_state"]
        self.norm = NormStats.from_dict(meta["norm"])
        self.metrics = Metrics.from_dict(meta["metrics"])
        self.epoch = checkpoint.epoch
        self.diverging_epochs = int(meta.get("trainer", {}).get("diverging_epochs", 0))
        for record in self.metrics.records:
            self.exporter.record(record, samples=len(self.train_set))
        logger.info("training_resumed", epoch=self.epoch, records=len(self.metrics.records))


def train(
    model: Layer,
    dataset: Dataset,
    cfg: TrainConfig,
    val_set: Optional[Dataset] = None,
    out_dir: Optional[Union[str, Path]] = None,
    threads: Optional[int] = None,
) -> Metrics:
    """Train `model` on `dataset` for cfg.epochs and return the metrics stream."""
    return Trainer(model, dataset, cfg, val_set=val_set, out_dir=out_dir, threads=threads).fit()
