"""Forward and backward kernels for every primitive the HGC blocks need.

All functions are pure with respect to their inputs. The one exception is
`batchnorm` in training mode, which updates the running statistics held in the
explicit `BatchNormState` record it is given.

Tensors are numpy arrays in channel-major (n, c, h, w) layout. Kernels keep the
dtype of their inputs, so the same code serves 32-bit training and the 64-bit
replicas used for gradient checking.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import DivisibilityError, ShapeError, ValidationError
from .tensor import AXES, ConvWeights, check_tensor

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


# --- Convolution ---


def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def _check_conv_args(x: np.ndarray, w: ConvWeights, stride: int, pad: int) -> Tuple[int, int]:
    check_tensor(x)
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    if pad < 0:
        raise ValidationError(f"pad must be >= 0, got {pad}")
    channels = x.shape[1]
    if channels % w.groups != 0:
        raise DivisibilityError(f"input channels {channels} not divisible by groups {w.groups}")
    if channels != w.in_channels:
        raise ShapeError(
            f"channels mismatch: input has {channels} channels, weights expect "
            f"{w.groups} groups x {w.in_channels_per_group} = {w.in_channels}"
        )
    out_h = conv_output_size(x.shape[2], w.kernel_h, stride, pad)
    out_w = conv_output_size(x.shape[3], w.kernel_w, stride, pad)
    if out_h < 1:
        raise ShapeError(f"rows {x.shape[2]} too small for kernel_h {w.kernel_h} with pad {pad}")
    if out_w < 1:
        raise ShapeError(f"cols {x.shape[3]} too small for kernel_w {w.kernel_w} with pad {pad}")
    return out_h, out_w


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _im2col(
    x: np.ndarray, kh: int, kw: int, stride: int, pad: int, out_h: int, out_w: int
) -> np.ndarray:
    """Unfold x into (n, c, kh, kw, out_h, out_w) patches."""
    n, c = x.shape[:2]
    xp = _pad(x, pad)
    cols = np.empty((n, c, kh, kw, out_h, out_w), dtype=x.dtype)
    for i in range(kh):
        i_max = i + stride * out_h
        for j in range(kw):
            j_max = j + stride * out_w
            cols[:, :, i, j] = xp[:, :, i:i_max:stride, j:j_max:stride]
    return cols


def _col2im(
    dcols: np.ndarray, x_shape: Sequence[int], stride: int, pad: int
) -> np.ndarray:
    """Fold (n, c, kh, kw, out_h, out_w) patch gradients back onto the input."""
    n, c, h, w = x_shape
    _, _, kh, kw, out_h, out_w = dcols.shape
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    for i in range(kh):
        i_max = i + stride * out_h
        for j in range(kw):
            j_max = j + stride * out_w
            dxp[:, :, i:i_max:stride, j:j_max:stride] += dcols[:, :, i, j]
    return dxp[:, :, pad : pad + h, pad : pad + w]


def _grouped_columns(
    x: np.ndarray, w: ConvWeights, stride: int, pad: int, out_h: int, out_w: int
) -> np.ndarray:
    """Patches reshaped to (n, groups, in_per_group * kh * kw, out_h * out_w)."""
    n, c = x.shape[:2]
    pointwise = w.kernel_h == 1 and w.kernel_w == 1 and stride == 1 and pad == 0
    if pointwise:
        return x.reshape(n, w.groups, c // w.groups, out_h * out_w)
    cols = _im2col(x, w.kernel_h, w.kernel_w, stride, pad, out_h, out_w)
    return cols.reshape(n, w.groups, -1, out_h * out_w)


def conv2d(
    x: np.ndarray, w: ConvWeights, stride: int = 1, pad: int = 0, method: str = "im2col"
) -> np.ndarray:
    """Grouped 2-D convolution (cross-correlation), no bias unless `w.bias` is set.

    Output group g reads only input channels [g*I/G, (g+1)*I/G).

    Args:
        x: input of shape (n, groups * in_per_group, h, w)
        w: filters (out, in_per_group, kh, kw) with `groups`
        stride: step between output positions
        pad: zero padding on each spatial side
        method: "im2col" (matmul fast path) or "direct" (reference loops)

    Returns:
        Tensor of shape (n, out, out_h, out_w)
    """
    out_h, out_w = _check_conv_args(x, w, stride, pad)
    if method == "direct":
        return conv2d_direct(x, w, stride, pad)
    if method != "im2col":
        raise ValidationError(f"unknown convolution method {method!r}")

    n = x.shape[0]
    groups = w.groups
    cols = _grouped_columns(x, w, stride, pad, out_h, out_w)
    wmat = w.data.reshape(groups, w.out_channels // groups, -1).astype(x.dtype, copy=False)
    out = np.matmul(wmat[None], cols).reshape(n, w.out_channels, out_h, out_w)
    if w.bias is not None:
        out = out + w.bias.astype(x.dtype, copy=False)[None, :, None, None]
    return out


def conv2d_direct(x: np.ndarray, w: ConvWeights, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Direct-loop convolution; the oracle the im2col path is checked against."""
    out_h, out_w = _check_conv_args(x, w, stride, pad)
    n = x.shape[0]
    xp = _pad(x, pad)
    per_group_in = w.in_channels_per_group
    per_group_out = w.out_channels // w.groups
    out = np.zeros((n, w.out_channels, out_h, out_w), dtype=x.dtype)
    for o in range(w.out_channels):
        base = (o // per_group_out) * per_group_in
        for c in range(per_group_in):
            for i in range(w.kernel_h):
                for j in range(w.kernel_w):
                    rows = slice(i, i + stride * out_h, stride)
                    cols = slice(j, j + stride * out_w, stride)
                    window = xp[:, base + c, rows, cols]
                    out[:, o] += w.data[o, c, i, j] * window
        if w.bias is not None:
            out[:, o] += w.bias[o]
    return out


def conv2d_backward(
    dout: np.ndarray, x: np.ndarray, w: ConvWeights, stride: int = 1, pad: int = 0
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Gradients of conv2d with respect to input, filters and (optional) bias."""
    out_h, out_w = _check_conv_args(x, w, stride, pad)
    n, c, h, width = x.shape
    groups = w.groups
    if dout.shape != (n, w.out_channels, out_h, out_w):
        raise ShapeError(f"upstream gradient shape {dout.shape} does not match conv output")

    cols = _grouped_columns(x, w, stride, pad, out_h, out_w)
    dout_g = dout.reshape(n, groups, w.out_channels // groups, out_h * out_w)
    wmat = w.data.reshape(groups, w.out_channels // groups, -1).astype(dout.dtype, copy=False)

    dweight = np.matmul(dout_g, cols.transpose(0, 1, 3, 2)).sum(axis=0).reshape(w.data.shape)
    dcols = np.matmul(wmat.transpose(0, 2, 1)[None], dout_g)

    if w.kernel_h == 1 and w.kernel_w == 1 and stride == 1 and pad == 0:
        dx = dcols.reshape(n, c, h, width)
    else:
        dcols = dcols.reshape(n, c, w.kernel_h, w.kernel_w, out_h, out_w)
        dx = _col2im(dcols, x.shape, stride, pad)

    dbias = dout.sum(axis=(0, 2, 3)) if w.bias is not None else None
    return dx, dweight, dbias


def _check_depthwise(x: np.ndarray, w: ConvWeights) -> None:
    check_tensor(x)
    channels = x.shape[1]
    if w.groups != channels:
        raise ShapeError(f"depthwise groups {w.groups} must equal input channels {channels}")
    if w.in_channels_per_group != 1:
        raise ShapeError(
            f"depthwise weights need 1 input channel per group, got {w.in_channels_per_group}"
        )
    if (w.kernel_h, w.kernel_w) != (3, 3):
        raise ShapeError(f"depthwise kernel must be 3x3, got {w.kernel_h}x{w.kernel_w}")


def depthwise_conv3x3(
    x: np.ndarray, w: ConvWeights, stride: int = 1, pad: int = 1
) -> np.ndarray:
    """Per-channel 3x3 spatial filtering; channel count is preserved."""
    _check_depthwise(x, w)
    out_h, out_w = _check_conv_args(x, w, stride, pad)
    xp = _pad(x, pad)
    kernel = w.data[:, 0].astype(x.dtype, copy=False)
    out = np.zeros((x.shape[0], x.shape[1], out_h, out_w), dtype=x.dtype)
    for i in range(3):
        for j in range(3):
            window = xp[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride]
            out += kernel[None, :, i, j, None, None] * window
    if w.bias is not None:
        out = out + w.bias.astype(x.dtype, copy=False)[None, :, None, None]
    return out


def depthwise_conv3x3_backward(
    dout: np.ndarray, x: np.ndarray, w: ConvWeights, stride: int = 1, pad: int = 1
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    _check_depthwise(x, w)
    out_h, out_w = _check_conv_args(x, w, stride, pad)
    n, c, h, width = x.shape
    xp = _pad(x, pad)
    kernel = w.data[:, 0].astype(dout.dtype, copy=False)
    dxp = np.zeros_like(xp, dtype=dout.dtype)
    dweight = np.zeros(w.data.shape, dtype=dout.dtype)
    for i in range(3):
        for j in range(3):
            rows = slice(i, i + stride * out_h, stride)
            cols = slice(j, j + stride * out_w, stride)
            dweight[:, 0, i, j] = (dout * xp[:, :, rows, cols]).sum(axis=(0, 2, 3))
            dxp[:, :, rows, cols] += kernel[None, :, i, j, None, None] * dout
    dx = dxp[:, :, pad : pad + h, pad : pad + width]
    dbias = dout.sum(axis=(0, 2, 3)) if w.bias is not None else None
    return dx, dweight, dbias


# --- Channel bookkeeping ---


def shuffle_permutation(channels: int, groups: int) -> np.ndarray:
    """sigma with output channel k = input channel sigma[k]."""
    if groups < 1 or channels % groups != 0:
        raise DivisibilityError(f"channels {channels} not divisible by groups {groups}")
    k = np.arange(channels)
    return (k % groups) * (channels // groups) + k // groups


def channel_shuffle(x: np.ndarray, groups: int) -> np.ndarray:
    """Reshape (G, c/G) -> transpose interleave of channels; spatial data untouched."""
    check_tensor(x)
    n, c, h, w = x.shape
    if groups < 1 or c % groups != 0:
        raise DivisibilityError(f"channels {c} not divisible by shuffle groups {groups}")
    return x.reshape(n, groups, c // groups, h, w).transpose(0, 2, 1, 3, 4).reshape(n, c, h, w)


def channel_shuffle_backward(dout: np.ndarray, groups: int) -> np.ndarray:
    # The inverse permutation is a shuffle with c/G groups.
    return channel_shuffle(dout, dout.shape[1] // groups)


def concat_channels(parts: Sequence[np.ndarray]) -> np.ndarray:
    if not parts:
        raise ShapeError("concat_channels needs at least one part")
    first = check_tensor(parts[0], "parts[0]")
    for index, part in enumerate(parts[1:], start=1):
        check_tensor(part, f"parts[{index}]")
        for axis in (0, 2, 3):
            if part.shape[axis] != first.shape[axis]:
                raise ShapeError(
                    f"parts[{index}] {AXES[axis]} is "
                    f"{part.shape[axis]}, expected {first.shape[axis]}"
                )
    if len(parts) == 1:
        return first
    return np.concatenate(parts, axis=1)


def split_channels(x: np.ndarray, sizes: Sequence[int]) -> List[np.ndarray]:
    check_tensor(x)
    if any(size < 1 for size in sizes):
        raise ShapeError(f"split sizes must be positive, got {list(sizes)}")
    if sum(sizes) != x.shape[1]:
        raise ShapeError(f"split sizes {list(sizes)} do not sum to channels {x.shape[1]}")
    offsets = np.cumsum(sizes)[:-1]
    return np.split(x, offsets, axis=1)


# --- Normalization ---


@dataclass
class BatchNormState:
    """Running statistics of one batchnorm layer; the only mutable op state."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPS

    @classmethod
    def initial(cls, channels: int, dtype: np.dtype = np.float32) -> "BatchNormState":
        return cls(np.zeros(channels, dtype=dtype), np.ones(channels, dtype=dtype))


@dataclass
class BatchNormCache:
    x_hat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray
    training: bool


def batchnorm(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    state: BatchNormState,
    training: bool = True,
) -> Tuple[np.ndarray, BatchNormCache]:
    """Per-channel normalization; batch statistics in training, running stats in eval."""
    check_tensor(x)
    channels = x.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise ShapeError(
            f"gamma/beta length {gamma.shape}/{beta.shape} does not match channels {channels}"
        )
    if training:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        m = state.momentum
        state.running_mean = (m * state.running_mean + (1 - m) * mean).astype(
            state.running_mean.dtype
        )
        state.running_var = (m * state.running_var + (1 - m) * var).astype(
            state.running_var.dtype
        )
    else:
        mean = state.running_mean.astype(x.dtype, copy=False)
        var = state.running_var.astype(x.dtype, copy=False)
    inv_std = 1.0 / np.sqrt(var + state.eps)
    x_hat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    gamma = gamma.astype(x.dtype, copy=False)
    out = gamma[None, :, None, None] * x_hat + beta.astype(x.dtype, copy=False)[None, :, None, None]
    return out, BatchNormCache(x_hat=x_hat, inv_std=inv_std, gamma=gamma, training=training)


def batchnorm_backward(
    dout: np.ndarray, cache: BatchNormCache
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    x_hat, inv_std, gamma = cache.x_hat, cache.inv_std, cache.gamma
    dgamma = (dout * x_hat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dx_hat = dout * gamma[None, :, None, None]
    scale = inv_std[None, :, None, None]
    if not cache.training:
        return dx_hat * scale, dgamma, dbeta
    count = dout.shape[0] * dout.shape[2] * dout.shape[3]
    sum_dx_hat = dx_hat.sum(axis=(0, 2, 3), keepdims=True)
    sum_dx_hat_x_hat = (dx_hat * x_hat).sum(axis=(0, 2, 3), keepdims=True)
    dx = scale / count * (count * dx_hat - sum_dx_hat - x_hat * sum_dx_hat_x_hat)
    return dx, dgamma, dbeta


# --- Activations, pooling and the classifier head ---


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(dout: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dout * (x > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(-log(1 + exp(-x))) stays finite for large |x|.
    return np.exp(-np.logaddexp(0, -x)).astype(x.dtype, copy=False)


def sigmoid_backward(dout: np.ndarray, y: np.ndarray) -> np.ndarray:
    return dout * y * (1 - y)


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    check_tensor(x)
    return x.mean(axis=(2, 3), keepdims=True)


def global_avg_pool_backward(dout: np.ndarray, x_shape: Sequence[int]) -> np.ndarray:
    n, c, h, w = x_shape
    return np.broadcast_to(dout / (h * w), (n, c, h, w)).copy()


def avg_pool2x2(x: np.ndarray) -> np.ndarray:
    """2x2 average pool with stride 2."""
    check_tensor(x)
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2x2 needs even rows/cols, got {h}x{w}")
    return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def avg_pool2x2_backward(dout: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(dout / 4, 2, axis=2), 2, axis=3)


def linear(x: np.ndarray, weight: np.ndarray, bias: Optional[np.ndarray] = None) -> np.ndarray:
    """x (n, f) times weight (k, f) transposed, plus bias (k)."""
    if x.ndim != 2:
        raise ShapeError(f"linear input must be (n, features), got shape {x.shape}")
    if weight.ndim != 2 or weight.shape[1] != x.shape[1]:
        raise ShapeError(f"linear weight {weight.shape} does not accept {x.shape[1]} features")
    out = x @ weight.astype(x.dtype, copy=False).T
    if bias is not None:
        out = out + bias.astype(x.dtype, copy=False)
    return out


def linear_backward(
    dout: np.ndarray, x: np.ndarray, weight: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    dx = dout @ weight.astype(dout.dtype, copy=False)
    dweight = dout.T @ x
    dbias = dout.sum(axis=0)
    return dx, dweight, dbias


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean negative log-likelihood over the batch and its gradient w.r.t. logits."""
    if logits.ndim != 2:
        raise ShapeError(f"logits must be (n, classes), got shape {logits.shape}")
    labels = np.asarray(labels)
    n, classes = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch {n}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ValidationError(
            f"labels must lie in [0, {classes}), got range [{labels.min()}, {labels.max()}]"
        )
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(n)
    loss = float(-log_probs[rows, labels].mean())
    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1
    return loss, dlogits / n
