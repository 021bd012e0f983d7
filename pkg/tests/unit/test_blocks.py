import numpy as np
import pytest

from hgcnet.blocks import (
    BottleneckModule,
    HgcModule,
    HgcModuleSpec,
    SEBlock,
    SgcModule,
    build_module,
)
from hgcnet.core.exceptions import DivisibilityError, ShapeError, ValidationError
from hgcnet.engine.layers import ChannelShuffle, Conv2d
from hgcnet.engine.tensor import DTYPE
from hgcnet.hgc import GroupConv1x1, HgcLayerSpec, HierarchicalGroupConv, hgc_param_count

MODULE = HgcModuleSpec(in_channels=16, growth_rate=4, groups=4)


@pytest.mark.parametrize(
    "variant, module_type, reduce_type",
    [
        ("hgc", HgcModule, HierarchicalGroupConv),
        ("sgc", SgcModule, GroupConv1x1),
        ("bottleneck", BottleneckModule, Conv2d),
    ],
)
def test_build_module_picks_the_reduction(rng, variant, module_type, reduce_type):
    """Test each variant differs only in its 1x1 reduction and produces growth_rate channels."""
    module = build_module(variant, MODULE, rng=rng)

    assert type(module) is module_type
    assert type(module.child("reduce")) is reduce_type
    y = module.forward(rng.standard_normal((2, 16, 4, 4)).astype(DTYPE))
    assert y.shape == (2, 4, 4, 4)


def test_pipeline_order(rng):
    """Test shuffle precedes the reduction and no ReLU follows the middle batchnorm."""
    names = [name for name, _ in build_module("hgc", MODULE, rng=rng).children()]

    assert names == [
        "norm_in",
        "relu_in",
        "shuffle",
        "reduce",
        "norm_mid",
        "depthwise",
        "pointwise",
        "norm_out",
        "relu_out",
    ]
    bottleneck = [name for name, _ in build_module("bottleneck", MODULE, rng=rng).children()]
    assert "shuffle" not in bottleneck
    assert isinstance(build_module("sgc", MODULE, rng=rng).child("shuffle"), ChannelShuffle)


def test_module_parameter_counts(rng):
    """Test module counts add up from their layers."""
    width = MODULE.bottleneck_width
    shared = 2 * 16 + 2 * width + 9 * width + width * 4 + 2 * 4

    hgc = build_module("hgc", MODULE, rng=rng).parameter_count()
    sgc = build_module("sgc", MODULE, rng=rng).parameter_count()
    dense = build_module("bottleneck", MODULE, rng=rng).parameter_count()

    assert hgc == shared + hgc_param_count(HgcLayerSpec(16, width, 4))
    assert sgc == shared + 16 * width // 4
    assert dense == shared + 16 * width
    assert sgc < hgc < dense


def test_module_spec_validation():
    """Test widths that cannot be split into groups are rejected."""
    with pytest.raises(DivisibilityError, match="input channels"):
        HgcModuleSpec(in_channels=10, growth_rate=4, groups=4)
    with pytest.raises(DivisibilityError, match="bottleneck width"):
        HgcModuleSpec(in_channels=16, growth_rate=3, groups=8, bottleneck_factor=2)
    with pytest.raises(ValidationError):
        HgcModuleSpec(in_channels=8, growth_rate=0)
    with pytest.raises(DivisibilityError, match="SE reduction"):
        HgcModuleSpec(in_channels=8, growth_rate=6, use_se=True, se_reduction=4)
    with pytest.raises(ValidationError, match="unknown module variant"):
        build_module("dense", MODULE)


def test_se_gates_scale_channels(rng):
    """Test the SE output is the input scaled per channel by gates in (0, 1)."""
    block = SEBlock(8, 4, rng=rng)
    x = rng.standard_normal((3, 8, 4, 4)).astype(DTYPE)

    gates = block.gates(x)
    y = block.forward(x)

    assert gates.shape == (3, 8)
    assert ((gates > 0) & (gates < 1)).all()
    np.testing.assert_allclose(y, x * gates[:, :, None, None], rtol=1e-6)
    assert block.parameter_count() == 8 * 2 + 2 + 2 * 8 + 8


def test_se_block_validation(rng):
    """Test reduction must divide the channels and inputs must match."""
    with pytest.raises(DivisibilityError):
        SEBlock(6, 4)
    with pytest.raises(ShapeError, match="expects 8 channels"):
        SEBlock(8, 4, rng=rng).forward(np.zeros((1, 4, 2, 2), DTYPE))


def test_se_module_appends_the_gate(rng):
    """Test use_se adds an SE block after the output ReLU."""
    spec = HgcModuleSpec(in_channels=16, growth_rate=4, groups=4, use_se=True, se_reduction=2)
    module = build_module("hgc", spec, rng=rng)

    assert [name for name, _ in module.children()][-1] == "se"
    assert module.child("se").reduction == 2


def test_single_group_hgc_module_is_the_bottleneck(rng):
    """Test G = 1 without SE makes the HGC module compute the dense bottleneck."""
    spec = HgcModuleSpec(in_channels=12, growth_rate=4, groups=1)
    hgc = build_module("hgc", spec, rng=rng)
    dense = build_module("bottleneck", spec, rng=rng)
    for (_, target), (_, source) in zip(hgc.named_parameters(), dense.named_parameters()):
        assert target.shape == source.shape
        target.value[...] = source.value
    x = rng.standard_normal((2, 12, 5, 5)).astype(DTYPE)

    np.testing.assert_allclose(hgc.forward(x), dense.forward(x), atol=1e-5)


@pytest.mark.parametrize(
    "in_channels, growth_rate, groups",
    [(6, 2, 1), (8, 4, 2), (12, 6, 3), (16, 8, 4), (24, 4, 2), (48, 12, 4)],
)
@pytest.mark.parametrize("variant", ["hgc", "sgc", "bottleneck"])
def test_module_output_shape_grid(rng, variant, in_channels, growth_rate, groups):
    """Test every variant maps (n, C_in, h, w) to (n, growth_rate, h, w)."""
    spec = HgcModuleSpec(in_channels=in_channels, growth_rate=growth_rate, groups=groups)
    x = rng.standard_normal((2, in_channels, 5, 3)).astype(DTYPE)

    assert build_module(variant, spec, rng=rng).forward(x).shape == (2, growth_rate, 5, 3)


def _through_depthwise(module, z):
    for name in ("reduce", "norm_mid", "depthwise"):
        z = module.child(name).forward(z)
    return z


@pytest.mark.parametrize("bumped", [0, 1, 2, 3])
def test_sgc_module_keeps_groups_apart_until_the_pointwise_mix(rng, bumped):
    """Test a change in one reduction group stays in that group through the depthwise stage."""
    sgc = build_module("sgc", MODULE, rng=rng)
    hgc = build_module("hgc", MODULE, rng=rng)
    z = rng.standard_normal((2, 16, 4, 4)).astype(DTYPE)
    per_in = 16 // 4
    moved = z.copy()
    # random, not constant: a constant shift would be removed by the batchnorm
    moved[:, bumped * per_in : (bumped + 1) * per_in] += rng.standard_normal((2, per_in, 4, 4))

    def changed(module):
        delta = np.abs(_through_depthwise(module, moved) - _through_depthwise(module, z))
        per_group = delta.transpose(1, 0, 2, 3).reshape(4, -1).max(axis=1)
        return [g for g, change in enumerate(per_group) if change > 1e-6]

    assert changed(sgc) == [bumped]
    assert changed(hgc) == list(range(bumped, 4))


def test_se_gate_extremes(rng):
    """Test a zero excitation halves the input and a saturated one passes it through."""
    block = SEBlock(8, 4, rng=rng)
    x = rng.standard_normal((2, 8, 3, 3)).astype(DTYPE)

    block.fc2.weight.value[...] = 0.0
    block.fc2.bias.value[...] = 0.0
    np.testing.assert_allclose(block.forward(x), 0.5 * x, rtol=1e-6)

    block.fc2.bias.value[...] = 50.0
    np.testing.assert_allclose(block.forward(x), x, rtol=1e-6)


def test_se_matches_composed_operations(rng):
    """Test the SE output against pooling, two dense layers and a sigmoid written out."""
    block = SEBlock(8, 2, rng=rng).replicate(np.float64)
    x = rng.standard_normal((3, 8, 4, 4))
    fc1, fc2 = block.fc1, block.fc2

    squeezed = x.mean(axis=(2, 3))
    hidden = np.maximum(squeezed @ fc1.weight.value.T + fc1.bias.value, 0)
    gates = 1 / (1 + np.exp(-(hidden @ fc2.weight.value.T + fc2.bias.value)))

    np.testing.assert_allclose(block.forward(x), x * gates[:, :, None, None], rtol=1e-12)


def test_reading_gates_between_forward_and_backward(rng):
    """Test inspecting the gates leaves the pending backward pass intact."""
    x = rng.standard_normal((2, 8, 3, 3))
    grad = rng.standard_normal((2, 8, 3, 3))
    plain = SEBlock(8, 4, rng=np.random.default_rng(5)).replicate(np.float64)
    inspected = SEBlock(8, 4, rng=np.random.default_rng(5)).replicate(np.float64)

    plain.forward(x)
    expected = plain.backward(grad)
    inspected.forward(x)
    inspected.gates(2 * x)
    got = inspected.backward(grad)

    np.testing.assert_allclose(got, expected, rtol=1e-12)
    for (name, a), (_, b) in zip(plain.named_parameters(), inspected.named_parameters()):
        np.testing.assert_allclose(b.grad, a.grad, rtol=1e-12, err_msg=name)
