"""Asymmetric convolution block: branch sum, gradients and kernel fusion."""

import numpy as np
import pytest

from jamforge.nn import AcbBlock, BatchNorm2d, Conv2d, Model
from jamforge.rng import Rng

from test_layers import _check_layer_grads


def _randomize_stats(block, rng):
    """Give the batchnorms non-trivial eval statistics and affine terms."""
    for bn in (block.bn_square, block.bn_horizontal, block.bn_vertical):
        bn.running_mean[:] = rng.normal(size=bn.channels).astype(bn.running_mean.dtype)
        bn.running_var[:] = rng.uniform(0.2, 2.0, bn.channels).astype(bn.running_var.dtype)
        bn.gamma[:] = rng.uniform(0.5, 1.5, bn.channels).astype(bn.gamma.dtype)
        bn.beta[:] = rng.normal(size=bn.channels).astype(bn.beta.dtype)


def test_forward_is_sum_of_three_branches():
    rng = Rng(1)
    block = AcbBlock(3, 4, rng=rng, dtype=np.float32)
    x = rng.normal(size=(2, 3, 9, 9)).astype(np.float32)
    for training in (True, False):
        block.set_training(training)
        got = block.forward(x)
        ys = [bn.forward(conv.forward(x)) for _, conv, bn in block._branches()]
        assert np.array_equal(got, (ys[0] + ys[1]) + ys[2])


def test_branch_shapes_agree():
    block = AcbBlock(2, 5, rng=Rng(2))
    x = np.zeros((1, 2, 8, 8), dtype=np.float32)
    assert block.forward(x).shape == (1, 5, 8, 8)
    assert block.output_shape((2, 8, 8)) == (5, 8, 8)


def test_gradients():
    rng = Rng(3)
    block = AcbBlock(2, 3, rng=rng, dtype=np.float64)
    x = rng.normal(size=(2, 2, 5, 5))
    _check_layer_grads(block, x,
                       params=("square.weight", "horizontal.bias",
                               "bn_vertical.gamma", "bn_square.beta"))


def test_param_and_state_namespaces():
    block = AcbBlock(2, 3, rng=Rng(4))
    pnames = set(block.params())
    assert pnames == {
        "square.weight", "square.bias", "bn_square.gamma", "bn_square.beta",
        "horizontal.weight", "horizontal.bias", "bn_horizontal.gamma", "bn_horizontal.beta",
        "vertical.weight", "vertical.bias", "bn_vertical.gamma", "bn_vertical.beta",
    }
    snames = set(block.state())
    assert snames == pnames | {
        "bn_square.running_mean", "bn_square.running_var",
        "bn_horizontal.running_mean", "bn_horizontal.running_var",
        "bn_vertical.running_mean", "bn_vertical.running_var",
    }


def test_fusion_matches_eval_block_double_precision():
    rng = Rng(5)
    for trial in range(5):
        block = AcbBlock(int(rng.integers(1, 5)), int(rng.integers(1, 5)),
                         rng=rng, dtype=np.float64)
        _randomize_stats(block, rng)
        block.set_training(False)
        x = rng.normal(size=(2, block.in_channels, 10, 10))
        fused = block.fuse()
        assert np.max(np.abs(fused.forward(x) - block.forward(x))) <= 1e-10


def test_fusion_matches_eval_block_single_precision():
    rng = Rng(6)
    for trial in range(5):
        block = AcbBlock(int(rng.integers(1, 5)), int(rng.integers(1, 5)),
                         rng=rng, dtype=np.float32)
        _randomize_stats(block, rng)
        block.set_training(False)
        x = rng.normal(size=(2, block.in_channels, 10, 10)).astype(np.float32)
        fused = block.fuse()
        assert np.max(np.abs(fused.forward(x) - block.forward(x))) <= 1e-4


def test_fused_kernel_geometry():
    # slim kernels must land in the center row / center column
    block = AcbBlock(1, 1, rng=None, dtype=np.float64)
    for bn in (block.bn_square, block.bn_horizontal, block.bn_vertical):
        bn.running_var[:] = 1.0 - bn.eps  # scale factor becomes exactly 1
    block.horizontal.weight[0, 0, 0, :] = [10.0, 20.0, 30.0]
    block.vertical.weight[0, 0, :, 0] = [1.0, 2.0, 3.0]
    block.square.weight[0, 0] = 0.0
    fused = block.fuse()
    want = np.array([[0.0, 1.0, 0.0],
                     [10.0, 22.0, 30.0],
                     [0.0, 3.0, 0.0]])
    assert np.max(np.abs(fused.weight[0, 0] - want)) < 1e-12


def test_fusion_folds_bias_and_beta():
    block = AcbBlock(1, 1, rng=None, dtype=np.float64)
    for i, (_, conv, bn) in enumerate(block._branches()):
        conv.bias[:] = 0.5 * (i + 1)
        bn.running_mean[:] = 0.1 * (i + 1)
        bn.running_var[:] = 1.0 - bn.eps
        bn.beta[:] = -0.2 * (i + 1)
    fused = block.fuse()
    want = sum((0.5 * (i + 1) - 0.1 * (i + 1)) - 0.2 * (i + 1) for i in range(3))
    assert fused.bias[0] == pytest.approx(want, rel=1e-12)


def test_fusion_rejects_broken_variance():
    block = AcbBlock(1, 2, rng=Rng(7))
    block.bn_horizontal.running_var[:] = -1.0
    with pytest.raises(ValueError, match="horizontal"):
        block.fuse()


def test_flops_counts_all_three_branches():
    block = AcbBlock(2, 3, rng=Rng(8))
    shape = (2, 8, 8)
    want = sum(conv.flops(shape) for _, conv, _ in block._branches())
    assert block.flops(shape) == want
    # one fused 3x3 conv is strictly cheaper
    assert block.fuse().flops(shape) < want


def test_spec_round_trip_preserves_structure():
    block = AcbBlock(3, 6, stride=1, rng=Rng(9))
    spec = block.spec()
    assert spec == {"type": "acb", "in": 3, "out": 6, "stride": 1}


def test_training_flag_reaches_every_branch():
    block = AcbBlock(1, 1, rng=Rng(10))
    model = Model([block])
    model.set_training(False)
    for _, conv, bn in block._branches():
        assert bn.training is False
    assert block.training is False
