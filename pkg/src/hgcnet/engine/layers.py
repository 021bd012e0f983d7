"""Stateful layers: parameters, buffers and forward caches around the kernels."""

import copy
from collections import OrderedDict
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..core.exceptions import ShapeError, StateError
from . import functional as F
from .tensor import DTYPE, ConvWeights, Parameter, he_normal


class Layer:
    """Base class for everything with a forward and a backward pass.

    A layer caches what its backward pass needs during `forward`; calling
    `backward` without a preceding `forward` raises StateError. Parameter
    gradients accumulate into `Parameter.grad` until `zero_grad`.
    """

    def __init__(self) -> None:
        self.training = True
        self._params: "OrderedDict[str, Parameter]" = OrderedDict()
        self._children: "OrderedDict[str, Layer]" = OrderedDict()
        self._cache: Any = None

    # --- registration and traversal ---

    def add_parameter(self, name: str, param: Parameter) -> Parameter:
        self._params[name] = param
        return param

    def add_child(self, name: str, layer: "Layer") -> "Layer":
        self._children[name] = layer
        return layer

    def child(self, name: str) -> "Layer":
        return self._children[name]

    def children(self) -> Iterator[Tuple[str, "Layer"]]:
        return iter(self._children.items())

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, param in self._params.items():
            yield prefix + name, param
        for child_name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def parameters(self) -> List[Parameter]:
        return [param for _, param in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        """Non-trainable state arrays, e.g. batchnorm running statistics."""
        for child_name, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{child_name}.")

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        head, _, rest = name.partition(".")
        if head not in self._children:
            raise KeyError(name)
        self._children[head].set_buffer(rest, value)

    def parameter_count(self) -> int:
        return sum(param.size for param in self.parameters())

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def train(self, mode: bool = True) -> "Layer":
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> "Layer":
        return self.train(False)

    def replicate(self, dtype: np.dtype = np.float64) -> "Layer":
        """Deep copy with every parameter and buffer cast to `dtype`."""
        replica = copy.deepcopy(self)
        replica._cast(dtype)
        return replica

    def _cast(self, dtype: np.dtype) -> None:
        swapped: Dict[int, Parameter] = {}
        for name, param in list(self._params.items()):
            swapped[id(param)] = self._params[name] = param.astype(dtype)
        # Rebind attribute aliases such as `self.weight` to the cast copies.
        for attr, value in list(vars(self).items()):
            if isinstance(value, Parameter) and id(value) in swapped:
                setattr(self, attr, swapped[id(value)])
        self._cache = None
        for _, child in self.children():
            child._cast(dtype)

    # --- computation ---

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _pop_cache(self) -> Any:
        if self._cache is None:
            raise StateError(f"{type(self).__name__}.backward called before forward")
        cache, self._cache = self._cache, None
        return cache


class Conv2d(Layer):
    """Bias-free convolution; groups > 1 gives the standard group convolution."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int = 1,
        stride: int = 1,
        pad: int = 0,
        groups: int = 1,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        weights = ConvWeights.initialize(rng, out_channels, in_channels, kernel, groups)
        self.groups = groups
        self.stride = stride
        self.pad = pad
        self.weight = self.add_parameter("weight", Parameter(weights.data))

    @property
    def weights(self) -> ConvWeights:
        return ConvWeights(self.weight.value, groups=self.groups)

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = x
        return F.conv2d(x, self.weights, self.stride, self.pad)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._pop_cache()
        dx, dweight, _ = F.conv2d_backward(grad, x, self.weights, self.stride, self.pad)
        self.weight.accumulate(dweight)
        return dx


class DepthwiseConv3x3(Layer):
    def __init__(
        self,
        channels: int,
        stride: int = 1,
        pad: int = 1,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.stride = stride
        self.pad = pad
        self.weight = self.add_parameter(
            "weight", Parameter(he_normal(rng, (channels, 1, 3, 3), fan_in=9))
        )

    @property
    def weights(self) -> ConvWeights:
        return ConvWeights(self.weight.value, groups=self.weight.shape[0])

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = x
        return F.depthwise_conv3x3(x, self.weights, self.stride, self.pad)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._pop_cache()
        dx, dweight, _ = F.depthwise_conv3x3_backward(
            grad, x, self.weights, self.stride, self.pad
        )
        self.weight.accumulate(dweight)
        return dx


class ChannelShuffle(Layer):
    def __init__(self, groups: int):
        super().__init__()
        self.groups = groups

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = True
        return F.channel_shuffle(x, self.groups)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self._pop_cache()
        return F.channel_shuffle_backward(grad, self.groups)


class BatchNorm2d(Layer):
    def __init__(self, channels: int, dtype: np.dtype = DTYPE):
        super().__init__()
        self.channels = channels
        self.gamma = self.add_parameter("gamma", Parameter(np.ones(channels, dtype), decay=False))
        self.beta = self.add_parameter("beta", Parameter(np.zeros(channels, dtype), decay=False))
        self.state = F.BatchNormState.initial(channels, dtype)

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        yield prefix + "running_mean", self.state.running_mean
        yield prefix + "running_var", self.state.running_var

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        if name not in ("running_mean", "running_var"):
            raise KeyError(name)
        current = getattr(self.state, name)
        if value.shape != current.shape:
            raise ShapeError(f"{name} shape {value.shape} != {current.shape}")
        setattr(self.state, name, value.astype(current.dtype))

    def _cast(self, dtype: np.dtype) -> None:
        super()._cast(dtype)
        self.state.running_mean = self.state.running_mean.astype(dtype)
        self.state.running_var = self.state.running_var.astype(dtype)

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, self._cache = F.batchnorm(
            x, self.gamma.value, self.beta.value, self.state, training=self.training
        )
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        dx, dgamma, dbeta = F.batchnorm_backward(grad, self._pop_cache())
        self.gamma.accumulate(dgamma)
        self.beta.accumulate(dbeta)
        return dx


class ReLU(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = x
        return F.relu(x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return F.relu_backward(grad, self._pop_cache())


class Sigmoid(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        out = F.sigmoid(x)
        self._cache = out
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return F.sigmoid_backward(grad, self._pop_cache())


class GlobalAvgPool(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = x.shape
        return F.global_avg_pool(x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return F.global_avg_pool_backward(grad, self._pop_cache())


class AvgPool2x2(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = True
        return F.avg_pool2x2(x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self._pop_cache()
        return F.avg_pool2x2_backward(grad)


class Flatten(Layer):
    """(n, c, 1, 1) or any (n, ...) to (n, features)."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad.reshape(self._pop_cache())


class Linear(Layer):
    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: Optional[np.random.Generator] = None,
        zero_init: bool = False,
    ):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        if zero_init:
            value = np.zeros((out_features, in_features), dtype=DTYPE)
        else:
            value = he_normal(rng, (out_features, in_features), fan_in=in_features)
        self.weight = self.add_parameter("weight", Parameter(value))
        self.bias = self.add_parameter(
            "bias", Parameter(np.zeros(out_features, dtype=DTYPE), decay=False)
        )

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = x
        return F.linear(x, self.weight.value, self.bias.value)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._pop_cache()
        dx, dweight, dbias = F.linear_backward(grad, x, self.weight.value)
        self.weight.accumulate(dweight)
        self.bias.accumulate(dbias)
        return dx


class Sequential(Layer):
    """Runs named children in order; backward runs them in reverse."""

    def __init__(self, layers: Optional[Dict[str, Layer]] = None):
        super().__init__()
        for name, layer in (layers or {}).items():
            self.add_child(name, layer)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for _, layer in self.children():
            x = layer.forward(x)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for _, layer in reversed(list(self.children())):
            grad = layer.backward(grad)
        return grad
