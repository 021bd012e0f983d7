"""Hierarchical group convolution and the standard group convolution baseline."""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..core.exceptions import DivisibilityError, ShapeError, StateError
from ..engine import functional as F
from ..engine.layers import Conv2d, Layer
from ..engine.tensor import ConvWeights, Parameter, check_tensor
from .spec import HgcLayerSpec, HgcWeights


@dataclass
class HgcCache:
    """Per-group convolution inputs saved by the forward pass."""

    spec: HgcLayerSpec
    weights: HgcWeights
    inputs: List[np.ndarray]


def _check_hgc_args(x: np.ndarray, w: HgcWeights, spec: HgcLayerSpec) -> None:
    check_tensor(x)
    if w.spec != spec:
        raise ShapeError(f"weights were built for {w.spec}, not {spec}")
    if x.shape[1] != spec.in_channels:
        raise ShapeError(
            f"channels mismatch: input has {x.shape[1]} channels, layer expects "
            f"{spec.in_channels}"
        )


def _hgc_forward(x: np.ndarray, w: HgcWeights, spec: HgcLayerSpec) -> Tuple[np.ndarray, HgcCache]:
    _check_hgc_args(x, w, spec)
    x_groups = F.split_channels(x, [spec.in_per_group] * spec.groups)
    outputs: List[np.ndarray] = []
    inputs: List[np.ndarray] = []
    for index, (x_i, w_i) in enumerate(zip(x_groups, w)):
        # Y_1 = X_1 * W_1; Y_i = concat(X_i, Y_{i-1}) * W_i
        group_input = x_i if index == 0 else F.concat_channels([x_i, outputs[-1]])
        inputs.append(group_input)
        outputs.append(F.conv2d(group_input, w_i))
    return F.concat_channels(outputs), HgcCache(spec=spec, weights=w, inputs=inputs)


def hgc_forward(x: np.ndarray, w: HgcWeights, spec: HgcLayerSpec) -> np.ndarray:
    """Hierarchical group convolution with 1x1 kernels.

    Groups run in order: group i sees its own input slice plus the full output
    of group i-1, so the last group depends on every input channel.

    Args:
        x: input of shape (n, I, h, w)
        w: G weight blocks conforming to `spec`
        spec: the (I, O, G) layer description

    Returns:
        concat(Y_1, ..., Y_G) of shape (n, O, h, w)
    """
    return _hgc_forward(x, w, spec)[0]


def hgc_backward(
    upstream: np.ndarray, cache: Optional[HgcCache]
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Reverse of the group recurrence: returns dx and dW_1..dW_G."""
    if cache is None:
        raise StateError("hgc_backward needs the cache of a forward pass")
    spec = cache.spec
    dy = F.split_channels(upstream, [spec.out_per_group] * spec.groups)
    dx_groups: List[np.ndarray] = [np.empty(0)] * spec.groups
    dweights: List[np.ndarray] = [np.empty(0)] * spec.groups
    carry = np.zeros_like(dy[-1])
    for index in reversed(range(spec.groups)):
        grad = dy[index] + carry
        d_input, d_weight, _ = F.conv2d_backward(
            grad, cache.inputs[index], cache.weights.blocks[index]
        )
        dweights[index] = d_weight
        if index == 0:
            dx_groups[index] = d_input
        else:
            dx_groups[index], carry = F.split_channels(
                d_input, [spec.in_per_group, spec.out_per_group]
            )
    return F.concat_channels(dx_groups), dweights


def sgc_forward(x: np.ndarray, w: ConvWeights, groups: int) -> np.ndarray:
    """Standard group convolution with 1x1 kernels (the ablation baseline)."""
    if w.groups != groups:
        raise DivisibilityError(f"weights have {w.groups} groups, expected {groups}")
    if (w.kernel_h, w.kernel_w) != (1, 1):
        raise ShapeError(
            f"group convolution baseline needs 1x1 kernels, got {w.kernel_h}x{w.kernel_w}"
        )
    return F.conv2d(x, w)


class HierarchicalGroupConv(Layer):
    """HGC layer holding its G weight blocks as parameters `block1..blockG`."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        groups: int,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.spec = HgcLayerSpec(in_channels, out_channels, groups)
        for index, block in enumerate(HgcWeights.initialize(self.spec, rng), start=1):
            self.add_parameter(f"block{index}", Parameter(block.data))

    @property
    def blocks(self) -> List[Parameter]:
        return [self._params[f"block{index}"] for index in range(1, self.spec.groups + 1)]

    @property
    def weights(self) -> HgcWeights:
        return HgcWeights.from_arrays(self.spec, [param.value for param in self.blocks])

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, self._cache = _hgc_forward(x, self.weights, self.spec)
        return y

    def backward(self, grad: np.ndarray) -> np.ndarray:
        dx, dweights = hgc_backward(grad, self._pop_cache())
        for param, dweight in zip(self.blocks, dweights):
            param.accumulate(dweight)
        return dx


class GroupConv1x1(Conv2d):
    """Standard group convolution: 1x1 kernels split into `groups`."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        groups: int,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__(in_channels, out_channels, kernel=1, groups=groups, rng=rng)
        self.spec = HgcLayerSpec(in_channels, out_channels, groups)

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = x
        return sgc_forward(x, self.weights, self.groups)
