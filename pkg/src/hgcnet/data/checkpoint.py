"""Binary checkpoint format.

Layout, all integers little-endian u32:

    magic "HGCNETCK" | version | metadata length | metadata (UTF-8 JSON, sorted keys)
    | blob count | blobs...

    blob = name length | name (UTF-8) | rank | dims... | float32 data (LE)

Blob names are `param:<name>` for parameters, `state:<name>` for buffers
such as batchnorm running statistics, and `velocity:<name>` for optimizer
momentum.
"""

import json
import os
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np
import structlog

from ..core.exceptions import CheckpointError
from ..engine.layers import Layer

logger = structlog.get_logger(__name__)

MAGIC = b"HGCNETCK"
VERSION = 1
PARAM_PREFIX = "param:"
STATE_PREFIX = "state:"
VELOCITY_PREFIX = "velocity:"
BLOB_DTYPE = np.dtype("<f4")


@dataclass
class Checkpoint:
    metadata: Dict[str, Any] = field(default_factory=dict)
    blobs: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    version: int = VERSION

    @property
    def epoch(self) -> int:
        return int(self.metadata.get("epoch", 0))

    def section(self, prefix: str) -> Dict[str, np.ndarray]:
        return {k[len(prefix) :]: v for k, v in self.blobs.items() if k.startswith(prefix)}


def _u32(value: int) -> bytes:
    return struct.pack("<I", value)


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    meta = json.dumps(checkpoint.metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, _u32(checkpoint.version), _u32(len(meta)), meta, _u32(len(checkpoint.blobs))]
    for name, array in checkpoint.blobs.items():
        encoded = name.encode("utf-8")
        data = np.ascontiguousarray(array, dtype=BLOB_DTYPE)
        parts += [_u32(len(encoded)), encoded, _u32(data.ndim)]
        parts += [_u32(dim) for dim in data.shape]
        parts.append(data.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.source = source
        self.offset = 0

    def take(self, count: int, what: str) -> bytes:
        end = self.offset + count
        if end > len(self.data):
            raise CheckpointError(
                f"{self.source}: truncated while reading {what} at byte offset {self.offset}"
            )
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def decode_checkpoint(data: bytes, source: str = "<bytes>") -> Checkpoint:
    reader = _Reader(data, source)
    magic = reader.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise CheckpointError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    version = reader.u32("version")
    if version != VERSION:
        raise CheckpointError(f"{source}: unsupported checkpoint version {version}")
    meta_bytes = reader.take(reader.u32("metadata length"), "metadata")
    try:
        metadata = json.loads(meta_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{source}: unreadable metadata: {e}") from e

    blobs: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(reader.u32("blob count")):
        name = reader.take(reader.u32("blob name length"), "blob name").decode("utf-8")
        rank = reader.u32(f"rank of {name}")
        shape = tuple(reader.u32(f"dims of {name}") for _ in range(rank))
        count = int(np.prod(shape, dtype=np.int64))
        raw = reader.take(count * BLOB_DTYPE.itemsize, f"data of {name}")
        blobs[name] = np.frombuffer(raw, dtype=BLOB_DTYPE).reshape(shape).astype(np.float32)
    if reader.offset != len(data):
        raise CheckpointError(f"{source}: {len(data) - reader.offset} trailing bytes")
    return Checkpoint(metadata=metadata, blobs=blobs, version=version)


def save_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> None:
    """Write `checkpoint` to `path`, replacing any existing file atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_checkpoint(checkpoint))
    os.replace(tmp, path)
    logger.debug("checkpoint_saved", path=str(path), blobs=len(checkpoint.blobs))


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes(), source=str(path))


def capture_checkpoint(
    model: Layer,
    velocities: Mapping[str, np.ndarray],
    metadata: Mapping[str, Any],
) -> Checkpoint:
    blobs: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, param in model.named_parameters():
        blobs[PARAM_PREFIX + name] = param.value
    for name, buffer in model.named_buffers():
        blobs[STATE_PREFIX + name] = buffer
    for name, velocity in velocities.items():
        blobs[VELOCITY_PREFIX + name] = velocity
    return Checkpoint(metadata=dict(metadata), blobs=blobs)


def _check_blob(name: str, blob: np.ndarray, expected: Tuple[int, ...]) -> None:
    if blob.shape != tuple(expected):
        raise CheckpointError(f"blob {name!r} has shape {blob.shape}, model expects {expected}")


def apply_checkpoint(checkpoint: Checkpoint, model: Layer) -> Dict[str, np.ndarray]:
    """Load parameters and buffers into `model`; return the velocity blobs.

    Every model parameter and buffer needs exactly one blob of the same shape,
    and every blob must belong to the model.
    """
    params = dict(model.named_parameters())
    buffers = dict(model.named_buffers())
    stored_params = checkpoint.section(PARAM_PREFIX)
    stored_state = checkpoint.section(STATE_PREFIX)
    velocities = checkpoint.section(VELOCITY_PREFIX)

    for prefix, stored, expected in (
        (PARAM_PREFIX, stored_params, params),
        (STATE_PREFIX, stored_state, buffers),
        (VELOCITY_PREFIX, velocities, params),
    ):
        for name in stored:
            if name not in expected:
                raise CheckpointError(f"blob {prefix + name!r} does not belong to the model")
    for name, param in params.items():
        if name not in stored_params:
            raise CheckpointError(f"blob {PARAM_PREFIX + name!r} missing from checkpoint")
        _check_blob(PARAM_PREFIX + name, stored_params[name], param.shape)
        if name in velocities:
            _check_blob(VELOCITY_PREFIX + name, velocities[name], param.shape)
    for name, buffer in buffers.items():
        if name not in stored_state:
            raise CheckpointError(f"blob {STATE_PREFIX + name!r} missing from checkpoint")
        _check_blob(STATE_PREFIX + name, stored_state[name], buffer.shape)

    for name, param in params.items():
        param.value = stored_params[name].astype(param.value.dtype, copy=True)
        param.zero_grad()
    for name in buffers:
        model.set_buffer(name, stored_state[name])
    return velocities
