"""Reader for the binary versions of CIFAR-10 and CIFAR-100.

Record layouts (every byte unsigned):

    CIFAR-10:   <label> <3072 pixels>
    CIFAR-100:  <coarse label> <fine label> <3072 pixels>

Pixels are the red plane, then green, then blue, each 32x32 row-major.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Dict, Optional, Tuple, Union

import numpy as np
import structlog

from ..core.exceptions import DataFormatError
from ..engine.tensor import DTYPE
from .dataset import Dataset

logger = structlog.get_logger(__name__)

IMAGE_SHAPE = (3, 32, 32)
PIXELS = 3 * 32 * 32
DEFAULT_CHUNK_RECORDS = 1000


@dataclass(frozen=True)
class CifarLayout:
    name: str
    # Exclusive upper bound of each label byte; the last byte is the class.
    label_ranges: Tuple[int, ...]
    directory: str
    train_files: Tuple[str, ...]
    test_files: Tuple[str, ...]

    @property
    def label_bytes(self) -> int:
        return len(self.label_ranges)

    @property
    def class_count(self) -> int:
        return self.label_ranges[-1]

    @property
    def record_bytes(self) -> int:
        return self.label_bytes + PIXELS


LAYOUTS: Dict[str, CifarLayout] = {
    "cifar10": CifarLayout(
        "cifar10", (10,), "cifar-10-batches-bin",
        tuple(f"data_batch_{i}.bin" for i in range(1, 6)), ("test_batch.bin",),
    ),
    "cifar100": CifarLayout(
        "cifar100", (20, 100), "cifar-100-binary", ("train.bin",), ("test.bin",)
    ),
}


def get_layout(which: str) -> CifarLayout:
    key = which.lower().replace("-", "").replace("_", "")
    key = {"c10": "cifar10", "c100": "cifar100"}.get(key, key)
    if key not in LAYOUTS:
        raise DataFormatError(f"unknown CIFAR variant {which!r}, expected cifar10 or cifar100")
    return LAYOUTS[key]


def decode_records(
    data: bytes, layout: CifarLayout, base_offset: int = 0, source: str = "<bytes>"
) -> Tuple[np.ndarray, np.ndarray]:
    """Decode whole records into (images in [0, 1], labels).

    `base_offset` is the file position of `data`, used in diagnostics.
    """
    record = layout.record_bytes
    if len(data) % record:
        complete = len(data) - len(data) % record
        raise DataFormatError(
            f"{source}: truncated record at byte offset {base_offset + complete}: "
            f"{len(data) - complete} of {record} bytes"
        )
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, record)
    label_raw = raw[:, : layout.label_bytes]
    bad = np.argwhere(label_raw >= np.array(layout.label_ranges))
    if bad.size:
        # argwhere is row-major, so the first hit is the earliest byte in the file
        index, column = (int(v) for v in bad[0])
        offset = base_offset + index * record + column
        raise DataFormatError(
            f"{source}: label {label_raw[index, column]} out of range "
            f"[0, {layout.label_ranges[column]}) at byte offset {offset}"
        )
    labels = label_raw[:, -1].astype(np.int64)
    images = raw[:, layout.label_bytes :].reshape(-1, *IMAGE_SHAPE).astype(DTYPE) / DTYPE(255)
    return images, labels


def _read_chunks(
    handle: BinaryIO, layout: CifarLayout, chunk_records: int, source: str
) -> Tuple[np.ndarray, np.ndarray]:
    images, labels, offset = [], [], 0
    chunk_bytes = chunk_records * layout.record_bytes
    while True:
        data = handle.read(chunk_bytes)
        if not data:
            break
        chunk_images, chunk_labels = decode_records(data, layout, offset, source)
        images.append(chunk_images)
        labels.append(chunk_labels)
        offset += len(data)
    if not images:
        return np.empty((0, *IMAGE_SHAPE), dtype=DTYPE), np.empty(0, dtype=np.int64)
    return np.concatenate(images), np.concatenate(labels)


def read_cifar_file(
    path: Union[str, Path], which: str = "cifar10", chunk_records: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Read one CIFAR binary file.

    Args:
        path: a `.bin` batch file
        which: cifar10 or cifar100
        chunk_records: stream this many records at a time; None reads the
            whole file at once. Both paths give identical arrays.

    Returns:
        (images of shape (N, 3, 32, 32) in [0, 1], labels of shape (N,))
    """
    layout = get_layout(which)
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"CIFAR file not found: {path}")
    size = path.stat().st_size
    if size % layout.record_bytes:
        complete = size - size % layout.record_bytes
        raise DataFormatError(
            f"{path}: size {size} is not a multiple of the {layout.record_bytes}-byte record; "
            f"truncated record at byte offset {complete}"
        )
    with path.open("rb") as handle:
        if chunk_records is None:
            return decode_records(handle.read(), layout, 0, str(path))
        if chunk_records < 1:
            raise DataFormatError(f"chunk_records must be >= 1, got {chunk_records}")
        return _read_chunks(handle, layout, chunk_records, str(path))


def find_cifar_dir(path: Union[str, Path], which: str = "cifar10") -> Path:
    """Accept the extracted batch directory or its parent."""
    layout = get_layout(which)
    path = Path(path)
    for candidate in (path, path / layout.directory):
        if all((candidate / name).is_file() for name in layout.train_files + layout.test_files):
            return candidate
    raise DataFormatError(
        f"no {layout.name} binary files under {path} "
        f"(expected {layout.train_files + layout.test_files})"
    )


def load_cifar(
    path: Union[str, Path],
    which: str = "cifar10",
    chunk_records: Optional[int] = DEFAULT_CHUNK_RECORDS,
) -> Tuple[Dataset, Dataset]:
    """Load the train and test splits of CIFAR-10 or CIFAR-100 (fine labels)."""
    layout = get_layout(which)
    directory = find_cifar_dir(path, which)
    splits = []
    for split, files in (("train", layout.train_files), ("test", layout.test_files)):
        parts = [read_cifar_file(directory / name, which, chunk_records) for name in files]
        images = np.concatenate([p[0] for p in parts])
        labels = np.concatenate([p[1] for p in parts])
        splits.append(Dataset(images, labels, layout.class_count, split))
    logger.info(
        "cifar_loaded",
        which=layout.name,
        directory=str(directory),
        train=len(splits[0]),
        test=len(splits[1]),
    )
    return splits[0], splits[1]
