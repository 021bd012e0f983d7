"""Per-epoch training metrics: CSV stream and prometheus textfile export."""

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

CSV_HEADER = ["epoch", "lr", "train_loss", "train_top1", "val_loss", "val_top1", "seconds"]


@dataclass
class EpochRecord:
    """One epoch. The top1 columns hold top-1 error percentages."""

    epoch: int
    lr: float
    train_loss: float
    train_top1: float
    val_loss: Optional[float]
    val_top1: Optional[float]
    seconds: float

    def row(self) -> List[str]:
        return ["" if v is None else repr(v) for v in asdict(self).values()]

    def deterministic(self) -> Tuple[Any, ...]:
        """Every field except wall time."""
        return (self.epoch, self.lr, self.train_loss, self.train_top1, self.val_loss, self.val_top1)


@dataclass
class Metrics:
    records: List[EpochRecord] = field(default_factory=list)
    # Eval-mode loss of the untrained model on the training split.
    initial_loss: Optional[float] = None

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    @property
    def last(self) -> Optional[EpochRecord]:
        return self.records[-1] if self.records else None

    def stream(self) -> List[Tuple[Any, ...]]:
        return [r.deterministic() for r in self.records]

    def write_csv(self, path: Union[str, Path]) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_HEADER)
            for record in self.records:
                writer.writerow(record.row())

    def to_dict(self) -> Dict[str, Any]:
        return {"initial_loss": self.initial_loss, "records": [asdict(r) for r in self.records]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Metrics":
        return cls(
            records=[EpochRecord(**r) for r in data.get("records", [])],
            initial_loss=data.get("initial_loss"),
        )


class MetricsExporter:
    """Prometheus gauges for one run, kept in a private registry."""

    def __init__(self, run: str = "train"):
        self.run = run
        self.registry = CollectorRegistry()
        labels = ["run"]
        self.epoch = Gauge("hgc_epoch", "Last completed epoch", labels, registry=self.registry)
        self.learning_rate = Gauge(
            "hgc_learning_rate", "Learning rate of the last epoch", labels, registry=self.registry
        )
        self.loss = Gauge(
            "hgc_loss", "Mean cross-entropy loss", labels + ["split"], registry=self.registry
        )
        self.top1_error = Gauge(
            "hgc_top1_error_percent", "Top-1 error in percent", labels + ["split"],
            registry=self.registry,
        )
        self.samples = Counter(
            "hgc_samples", "Training samples processed", labels, registry=self.registry
        )
        self.epoch_seconds = Histogram(
            "hgc_epoch_duration_seconds", "Wall time per epoch", labels,
            buckets=(1, 5, 15, 60, 300, 900, 3600), registry=self.registry,
        )

    def record(self, record: EpochRecord, samples: int) -> None:
        self.epoch.labels(run=self.run).set(record.epoch)
        self.learning_rate.labels(run=self.run).set(record.lr)
        self.loss.labels(run=self.run, split="train").set(record.train_loss)
        self.top1_error.labels(run=self.run, split="train").set(record.train_top1)
        if record.val_loss is not None and record.val_top1 is not None:
            self.loss.labels(run=self.run, split="val").set(record.val_loss)
            self.top1_error.labels(run=self.run, split="val").set(record.val_top1)
        self.samples.labels(run=self.run).inc(samples)
        self.epoch_seconds.labels(run=self.run).observe(record.seconds)

    def write(self, path: Union[str, Path]) -> None:
        write_to_textfile(str(path), self.registry)


def top1_error(correct: int, total: int) -> float:
    """100 * (1 - correct / total)."""
    if total <= 0:
        return math.nan
    return 100.0 * (1.0 - correct / total)
