"""Squeeze-and-excitation channel gating."""

from typing import Optional

import numpy as np

from ..core.exceptions import DivisibilityError, ShapeError
from ..engine import functional as F
from ..engine.layers import Flatten, GlobalAvgPool, Layer, Linear, ReLU, Sequential, Sigmoid
from ..engine.tensor import check_tensor

DEFAULT_SE_REDUCTION = 4


class SEBlock(Layer):
    """y = x * sigmoid(fc2(relu(fc1(avg_pool(x))))), one gate per channel."""

    def __init__(
        self,
        channels: int,
        reduction: int = DEFAULT_SE_REDUCTION,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        if reduction < 1 or channels % reduction:
            raise DivisibilityError(
                f"SE reduction {reduction} does not divide channels {channels}"
            )
        rng = rng or np.random.default_rng(0)
        self.channels = channels
        self.reduction = reduction
        hidden = channels // reduction
        self.excite = self.add_child(
            "excite",
            Sequential(
                {
                    "pool": GlobalAvgPool(),
                    "flatten": Flatten(),
                    "fc1": Linear(channels, hidden, rng=rng),
                    "relu": ReLU(),
                    "fc2": Linear(hidden, channels, rng=rng),
                    "gate": Sigmoid(),
                }
            ),
        )

    @property
    def fc1(self) -> Linear:
        return self.excite.child("fc1")  # type: ignore[return-value]

    @property
    def fc2(self) -> Linear:
        return self.excite.child("fc2")  # type: ignore[return-value]

    def gates(self, x: np.ndarray) -> np.ndarray:
        """Per-sample, per-channel scale factors in (0, 1).

        Computed from the kernels directly, so the caches of a pending
        forward pass survive.
        """
        self._check(x)
        pooled = F.global_avg_pool(x).reshape(x.shape[0], -1)
        hidden = F.relu(F.linear(pooled, self.fc1.weight.value, self.fc1.bias.value))
        return F.sigmoid(F.linear(hidden, self.fc2.weight.value, self.fc2.bias.value))

    def _check(self, x: np.ndarray) -> None:
        check_tensor(x)
        if x.shape[1] != self.channels:
            raise ShapeError(f"SE block expects {self.channels} channels, got {x.shape[1]}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        gates = self.excite.forward(x)
        self._cache = (x, gates)
        return x * gates[:, :, None, None]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x, gates = self._pop_cache()
        dx = grad * gates[:, :, None, None]
        dgates = (grad * x).sum(axis=(2, 3))
        return dx + self.excite.backward(dgates)

