import io
import struct
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pytest
import structlog

from hgcnet.core.config import LoggingConfig
from hgcnet.core.logging import LogManager
from hgcnet.data.synthetic import synth_dataset
from hgcnet.netbuilder.network import build_network
from hgcnet.netbuilder.spec import NetworkSpec
from hgcnet.training.config import TrainConfig


@pytest.fixture(autouse=True)
def quiet_logging():
    """Route structlog output into a buffer for the duration of a test."""
    buffer = io.StringIO()
    LogManager(LoggingConfig(level="WARNING"), stream=buffer)
    yield buffer
    structlog.reset_defaults()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_spec() -> NetworkSpec:
    """One stage of two HGC modules, growth rate 8, G = 2."""
    return NetworkSpec.from_preset("tiny")


@pytest.fixture
def tiny_net(tiny_spec):
    return build_network(tiny_spec, seed=0)


@pytest.fixture
def small_train_set():
    return synth_dataset(seed=0, n=64, classes=10, split="train")


@pytest.fixture
def small_val_set():
    return synth_dataset(seed=0, n=40, classes=10, split="val")


@pytest.fixture
def quick_train_config() -> TrainConfig:
    return TrainConfig(epochs=3, batch_size=32, seed=7, eval_every=1)


@pytest.fixture
def cifar_record() -> Callable[[Sequence[int], Sequence[int]], bytes]:
    """Build one binary CIFAR record from label bytes and pixel bytes (padded to 3072)."""

    def build(labels: Sequence[int], pixels: Sequence[int] = ()) -> bytes:
        body = list(pixels) + [0] * (3072 - len(pixels))
        return struct.pack(f"{len(labels)}B", *labels) + bytes(body)

    return build


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[str, str], Path]:
    """Write a run config file under tmp_path and return its path."""

    def write(text: str, name: str = "run.conf") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
