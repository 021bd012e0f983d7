import numpy as np
import pytest

from hgcnet.core.exceptions import ShapeError, StateError
from hgcnet.engine.layers import (
    BatchNorm2d,
    ChannelShuffle,
    Conv2d,
    Flatten,
    Linear,
    ReLU,
    Sequential,
)
from hgcnet.engine.tensor import DTYPE, Parameter


def _small_stack(rng):
    return Sequential(
        {
            "conv": Conv2d(3, 4, kernel=3, pad=1, rng=rng),
            "bn": BatchNorm2d(4),
            "relu": ReLU(),
        }
    )


def test_named_parameters_are_prefixed_and_tagged_for_decay(rng):
    """Test parameter names follow the child path and only weights decay."""
    net = Sequential({"features": _small_stack(rng), "flat": Flatten(), "fc": Linear(64, 2)})

    tags = {name: param.decay for name, param in net.named_parameters()}

    assert tags == {
        "features.conv.weight": True,
        "features.bn.gamma": False,
        "features.bn.beta": False,
        "fc.weight": True,
        "fc.bias": False,
    }
    assert net.parameter_count() == 4 * 3 * 9 + 4 + 4 + 64 * 2 + 2


def test_backward_before_forward_is_a_state_error(rng):
    """Test a backward pass without a cached forward is refused, also on repeat."""
    conv = Conv2d(2, 2, rng=rng)
    with pytest.raises(StateError, match="before forward"):
        conv.backward(np.zeros((1, 2, 2, 2), DTYPE))

    shuffle = ChannelShuffle(2)
    shuffle.forward(np.zeros((1, 4, 2, 2), DTYPE))
    shuffle.backward(np.zeros((1, 4, 2, 2), DTYPE))
    with pytest.raises(StateError):
        shuffle.backward(np.zeros((1, 4, 2, 2), DTYPE))


def test_gradients_accumulate_until_zero_grad(rng):
    """Test two backward passes sum into Parameter.grad."""
    fc = Linear(3, 2, rng=rng)
    x = rng.standard_normal((4, 3)).astype(DTYPE)
    dout = np.ones((4, 2), DTYPE)

    for _ in range(2):
        fc.forward(x)
        fc.backward(dout)

    np.testing.assert_allclose(fc.bias.grad, [8.0, 8.0])
    fc.zero_grad()
    assert not fc.bias.grad.any()


def test_parameter_rejects_mismatched_gradient():
    """Test a gradient of the wrong shape is refused."""
    param = Parameter(np.zeros((2, 3), DTYPE))
    with pytest.raises(ShapeError):
        param.accumulate(np.zeros((3, 2)))


def test_replicate_casts_and_rebinds_attributes(rng):
    """Test replicas are float64 copies whose attribute aliases point at the new parameters."""
    stack = _small_stack(rng)

    replica = stack.replicate(np.float64)

    conv = replica.child("conv")
    assert conv.weight is conv._params["weight"]
    assert conv.weight.value.dtype == np.float64
    assert replica.child("bn").state.running_var.dtype == np.float64
    assert stack.child("conv").weight.value.dtype == DTYPE
    np.testing.assert_array_equal(conv.weight.value, stack.child("conv").weight.value)

    conv.weight.value[...] = 0
    assert stack.child("conv").weight.value.any()


def test_batchnorm_buffers_round_trip(rng):
    """Test running statistics are exposed as buffers and can be replaced."""
    stack = _small_stack(rng)
    stack.forward(rng.standard_normal((2, 3, 4, 4)).astype(DTYPE))

    buffers = dict(stack.named_buffers())
    assert set(buffers) == {"bn.running_mean", "bn.running_var"}

    stack.set_buffer("bn.running_mean", np.full(4, 0.5))
    assert stack.child("bn").state.running_mean.dtype == DTYPE
    np.testing.assert_array_equal(stack.child("bn").state.running_mean, np.full(4, 0.5))
    with pytest.raises(ShapeError):
        stack.set_buffer("bn.running_var", np.ones(3))
    with pytest.raises(KeyError):
        stack.set_buffer("conv.running_mean", np.ones(4))


def test_eval_mode_propagates_and_freezes_statistics(rng):
    """Test eval() reaches every child and batchnorm stops updating its buffers."""
    stack = _small_stack(rng)
    x = rng.standard_normal((2, 3, 4, 4)).astype(DTYPE)

    stack.eval()
    before = stack.child("bn").state.running_mean.copy()
    first = stack.forward(x)
    second = stack.forward(x)

    assert not any(layer.training for _, layer in stack.children())
    np.testing.assert_array_equal(stack.child("bn").state.running_mean, before)
    np.testing.assert_array_equal(first, second)

    stack.train()
    stack.forward(x)
    assert not np.array_equal(stack.child("bn").state.running_mean, before)


def test_sequential_backward_runs_in_reverse(rng):
    """Test the stacked backward equals chaining the children by hand."""
    stack = _small_stack(rng)
    x = rng.standard_normal((2, 3, 4, 4)).astype(DTYPE)
    dout = rng.standard_normal((2, 4, 4, 4)).astype(DTYPE)

    stack.forward(x)
    dx = stack.backward(dout)

    replica = stack.replicate(DTYPE)
    grad = dout
    replica.forward(x)
    for name in ("relu", "bn", "conv"):
        grad = replica.child(name).backward(grad)
    np.testing.assert_allclose(dx, grad, rtol=1e-6)
