"""Layer forward oracles and finite-difference gradient checks.

Every check runs in float64: forward passes are compared against naive
loop implementations, backward passes against central differences of a
scalar probe loss sum(w * y) with a fixed random projection w.
"""

import numpy as np
import pytest

from jamforge.nn import (
    BatchNorm2d,
    Conv2d,
    GlobalAvgPool,
    Linear,
    MaxPool2x2,
    Model,
    Swish,
    layer_from_spec,
    softmax_cross_entropy,
)
from jamforge.rng import Rng


def _num_grad(f, x, eps=1e-5):
    """Central-difference gradient of scalar f() w.r.t. array x, in place."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f()
        flat[i] = old - eps
        fm = f()
        flat[i] = old
        gf[i] = (fp - fm) / (2.0 * eps)
    return g


def _check_layer_grads(layer, x, params=(), tol=1e-6, seed=0):
    """Probe loss sum(w*y); compare backward against numeric for x and params."""
    rng = Rng(seed)
    y = layer.forward(x)
    w = rng.normal(size=y.shape)

    def probe():
        return float(np.sum(w * layer.forward(x)))

    layer.forward(x)
    gx = layer.backward(w.astype(x.dtype))
    num_gx = _num_grad(probe, x)
    scale = max(1.0, float(np.max(np.abs(num_gx))))
    assert np.max(np.abs(gx - num_gx)) / scale < tol, "input gradient"

    layer.forward(x)
    layer.backward(w.astype(x.dtype))
    for name in params:
        got = layer.grads[name]
        num = _num_grad(probe, layer.params()[name])
        scale = max(1.0, float(np.max(np.abs(num))))
        assert np.max(np.abs(got - num)) / scale < tol, f"parameter {name}"


# ---------------------------------------------------------------- conv

def _conv_naive(x, w, b, stride, pad):
    n, ci, h, wd = x.shape
    co, _, kh, kw = w.shape
    ph, pw = pad
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    ho = (h + 2 * ph - kh) // stride + 1
    wo = (wd + 2 * pw - kw) // stride + 1
    out = np.zeros((n, co, ho, wo), dtype=x.dtype)
    for ni in range(n):
        for oc in range(co):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ic in range(ci):
                        for u in range(kh):
                            for v in range(kw):
                                acc += xp[ni, ic, i * stride + u, j * stride + v] \
                                    * w[oc, ic, u, v]
                    out[ni, oc, i, j] = acc + b[oc]
    return out


@pytest.mark.parametrize("kernel,pad,stride", [
    ((3, 3), (1, 1), 1),
    ((1, 3), (0, 1), 1),
    ((3, 1), (1, 0), 1),
    ((3, 3), (1, 1), 2),
    ((3, 3), (0, 0), 1),
])
def test_conv_forward_matches_naive(kernel, pad, stride):
    rng = Rng(1)
    conv = Conv2d(3, 4, kernel, stride, pad, rng=rng, dtype=np.float64)
    x = rng.normal(size=(2, 3, 7, 6))
    got = conv.forward(x)
    want = _conv_naive(x, conv.weight, conv.bias, stride, pad)
    assert got.shape == want.shape
    assert np.max(np.abs(got - want)) < 1e-12
    assert got.shape[1:] == conv.output_shape(x.shape[1:])


@pytest.mark.parametrize("kernel,pad,stride", [
    ((3, 3), (1, 1), 1),
    ((1, 3), (0, 1), 1),
    ((3, 1), (1, 0), 1),
    ((3, 3), (1, 1), 2),
])
def test_conv_gradients(kernel, pad, stride):
    rng = Rng(2)
    conv = Conv2d(2, 3, kernel, stride, pad, rng=rng, dtype=np.float64)
    x = rng.normal(size=(2, 2, 6, 5))
    _check_layer_grads(conv, x, params=("weight", "bias"))


def test_conv_rejects_wrong_channel_count():
    conv = Conv2d(3, 4, rng=Rng(0), dtype=np.float64)
    with pytest.raises(ValueError, match="conv2d expects"):
        conv.forward(np.zeros((1, 2, 8, 8)))


def test_conv_flops_formula():
    conv = Conv2d(3, 8, (3, 3), 1, (1, 1), rng=Rng(0))
    assert conv.flops((3, 10, 10)) == 2 * 10 * 10 * 3 * 3 * 3 * 8


# ---------------------------------------------------------------- batchnorm

def test_batchnorm_train_statistics_and_running_update():
    bn = BatchNorm2d(2, dtype=np.float64)
    rng = Rng(3)
    x = rng.normal(loc=3.0, scale=2.0, size=(4, 2, 5, 5))
    y = bn.forward(x)
    mean = x.mean(axis=(0, 2, 3))
    var = x.var(axis=(0, 2, 3))
    want = (x - mean[None, :, None, None]) / np.sqrt(var + 1e-5)[None, :, None, None]
    assert np.max(np.abs(y - want)) < 1e-12
    assert np.max(np.abs(bn.running_mean - 0.1 * mean)) < 1e-12
    assert np.max(np.abs(bn.running_var - (0.9 * 1.0 + 0.1 * var))) < 1e-12
    # second pass compounds the exponential moving average
    bn.forward(x)
    assert np.max(np.abs(bn.running_mean - (0.9 * 0.1 * mean + 0.1 * mean))) < 1e-12


def test_batchnorm_eval_uses_running_stats():
    bn = BatchNorm2d(2, dtype=np.float64)
    bn.running_mean[:] = [1.0, -1.0]
    bn.running_var[:] = [4.0, 0.25]
    bn.gamma[:] = [2.0, 3.0]
    bn.beta[:] = [0.5, -0.5]
    bn.set_training(False)
    x = np.zeros((1, 2, 2, 2))
    y = bn.forward(x)
    want0 = 2.0 * (0.0 - 1.0) / np.sqrt(4.0 + 1e-5) + 0.5
    want1 = 3.0 * (0.0 + 1.0) / np.sqrt(0.25 + 1e-5) - 0.5
    assert y[0, 0, 0, 0] == pytest.approx(want0, rel=1e-12)
    assert y[0, 1, 0, 0] == pytest.approx(want1, rel=1e-12)


def test_batchnorm_train_gradients_include_statistic_terms():
    bn = BatchNorm2d(3, dtype=np.float64)
    bn.gamma[:] = Rng(4).normal(size=3) + 1.5
    bn.beta[:] = Rng(5).normal(size=3)
    x = Rng(6).normal(size=(3, 3, 4, 4))
    _check_layer_grads(bn, x, params=("gamma", "beta"))


def test_batchnorm_eval_gradients():
    bn = BatchNorm2d(2, dtype=np.float64)
    bn.running_mean[:] = [0.3, -0.2]
    bn.running_var[:] = [1.5, 0.7]
    bn.set_training(False)
    x = Rng(7).normal(size=(2, 2, 3, 3))
    _check_layer_grads(bn, x, params=("gamma", "beta"))


def test_batchnorm_degenerate_batch_rejected():
    bn = BatchNorm2d(4, dtype=np.float64)
    with pytest.raises(ValueError, match="more than one value"):
        bn.forward(np.zeros((1, 4, 1, 1)))
    bn.set_training(False)
    bn.forward(np.zeros((1, 4, 1, 1)))  # eval mode is fine


def test_batchnorm_rejects_wrong_channels():
    bn = BatchNorm2d(4, dtype=np.float64)
    with pytest.raises(ValueError):
        bn.forward(np.zeros((2, 3, 4, 4)))


# ---------------------------------------------------------------- swish

def test_swish_values_and_stability():
    s = Swish()
    x = np.array([[-1000.0, -1.0, 0.0, 1.0, 1000.0]])
    y = s.forward(x)
    assert y[0, 0] == 0.0  # exp(-1000) underflows cleanly, no overflow
    assert y[0, 2] == 0.0
    assert y[0, 4] == pytest.approx(1000.0)
    assert y[0, 3] == pytest.approx(1.0 / (1.0 + np.exp(-1.0)), rel=1e-12)
    assert np.all(np.isfinite(y))


def test_swish_gradients():
    x = Rng(8).normal(size=(3, 4)) * 3.0
    _check_layer_grads(Swish(), x)


# ---------------------------------------------------------------- pooling

def _maxpool_naive(x):
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ho, wo = h // 2 + 1, w // 2 + 1
    out = np.zeros((n, c, ho, wo), dtype=x.dtype)
    for ni in range(n):
        for ci in range(c):
            for i in range(ho):
                for j in range(wo):
                    out[ni, ci, i, j] = xp[ni, ci, 2 * i:2 * i + 2, 2 * j:2 * j + 2].max()
    return out


def test_maxpool_forward_matches_naive():
    rng = Rng(9)
    for shape in ((2, 3, 8, 8), (1, 2, 7, 5), (1, 1, 4, 6)):
        x = rng.normal(size=shape)
        pool = MaxPool2x2()
        got = pool.forward(x)
        assert np.array_equal(got, _maxpool_naive(x))
        assert got.shape[1:] == pool.output_shape(shape[1:])


def test_maxpool_padding_can_win_with_negative_inputs():
    x = np.full((1, 1, 2, 2), -5.0)
    pool = MaxPool2x2()
    y = pool.forward(x)
    # corner windows pair each input value with three zero pads
    assert y[0, 0, 0, 0] == 0.0
    g = pool.backward(np.ones_like(y))
    assert np.all(g == 0.0)  # all gradient went to padding and was dropped


def test_maxpool_gradients_at_non_tied_points():
    rng = Rng(10)
    x = rng.normal(size=(2, 2, 6, 6))
    x = np.sign(x) * (np.abs(x) + 0.05)  # keep every entry away from the 0 pads
    _check_layer_grads(MaxPool2x2(), x)


def test_maxpool_tie_goes_to_first_in_window_order():
    x = np.zeros((1, 1, 4, 4))
    x[0, 0, 1:3, 1:3] = 7.0  # the interior window is all ties
    pool = MaxPool2x2()
    y = pool.forward(x)
    assert y[0, 0, 1, 1] == 7.0
    g = pool.backward(np.ones_like(y))
    # window rows 2:4, cols 2:4 of the padded grid = input rows/cols 1:3
    assert g[0, 0, 1, 1] == 1.0
    assert g[0, 0, 1, 2] == 0.0
    assert g[0, 0, 2, 1] == 0.0
    assert g[0, 0, 2, 2] == 0.0


def test_gap_value_and_gradients():
    x = Rng(11).normal(size=(2, 3, 4, 5))
    gap = GlobalAvgPool()
    assert np.max(np.abs(gap.forward(x) - x.mean(axis=(2, 3)))) < 1e-15
    _check_layer_grads(gap, x)
    assert gap.output_shape((3, 4, 5)) == (3,)


# ---------------------------------------------------------------- linear

def test_linear_value_and_gradients():
    rng = Rng(12)
    lin = Linear(5, 3, rng=rng, dtype=np.float64)
    x = rng.normal(size=(4, 5))
    got = lin.forward(x)
    want = np.array([[sum(x[n, i] * lin.weight[i, o] for i in range(5)) + lin.bias[o]
                      for o in range(3)] for n in range(4)])
    assert np.max(np.abs(got - want)) < 1e-12
    _check_layer_grads(lin, x, params=("weight", "bias"))


def test_linear_rejects_wrong_width():
    lin = Linear(5, 3, rng=Rng(0), dtype=np.float64)
    with pytest.raises(ValueError):
        lin.forward(np.zeros((2, 4)))


def test_linear_flops_formula():
    assert Linear(512, 9, rng=Rng(0)).flops((512,)) == (2 * 512 - 1) * 9


# ---------------------------------------------------------------- loss

def test_cross_entropy_uniform_logits():
    logits = np.zeros((4, 9))
    loss, grad = softmax_cross_entropy(logits, np.array([0, 3, 5, 8]))
    assert loss == pytest.approx(2.1972245773362196, abs=1e-15)  # ln 9
    assert grad.shape == (4, 9)
    assert np.max(np.abs(grad.sum(axis=1))) < 1e-15


def test_cross_entropy_confident_correct_prediction():
    logits = np.zeros((1, 9))
    logits[0, 2] = 50.0
    loss, _ = softmax_cross_entropy(logits, np.array([2]))
    assert loss < 1e-20


def test_cross_entropy_gradient_matches_numeric():
    rng = Rng(13)
    logits = rng.normal(size=(5, 7))
    labels = rng.integers(0, 7, 5)
    _, grad = softmax_cross_entropy(logits, labels)

    def probe():
        return softmax_cross_entropy(logits, labels)[0]

    num = _num_grad(probe, logits)
    assert np.max(np.abs(grad - num)) < 1e-6


def test_cross_entropy_large_logits_stay_finite():
    logits = np.array([[1000.0, -1000.0, 0.0]])
    loss, grad = softmax_cross_entropy(logits, np.array([1]))
    assert np.isfinite(loss)
    assert np.all(np.isfinite(grad))


def test_cross_entropy_validation():
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros(3), np.array([0]))
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros((2, 3)), np.array([0]))
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 3]))


# ---------------------------------------------------------------- model

def test_model_composes_layers_and_gradients():
    rng = Rng(14)
    model = Model([Linear(6, 5, rng=rng, dtype=np.float64), Swish(),
                   Linear(5, 3, rng=rng, dtype=np.float64)])
    x = rng.normal(size=(3, 6))
    w = rng.normal(size=(3, 3))

    def probe():
        return float(np.sum(w * model.forward(x)))

    model.forward(x)
    gx = model.backward(w)
    num = _num_grad(probe, x)
    assert np.max(np.abs(gx - num)) < 1e-6

    names = [n for n, _ in model.named_params()]
    assert names == ["0.weight", "0.bias", "2.weight", "2.bias"]
    assert [n for n, _ in model.named_grads()] == names


def test_model_set_training_propagates():
    model = Model([BatchNorm2d(2), Swish()])
    model.set_training(False)
    assert model.layers[0].training is False
    model.set_training(True)
    assert model.layers[0].training is True


def test_layer_from_spec_round_trip():
    layers = [Conv2d(2, 3, (1, 3), 2, (0, 1), rng=Rng(0)), BatchNorm2d(3),
              Swish(), MaxPool2x2(), GlobalAvgPool(), Linear(3, 4, rng=Rng(1))]
    for layer in layers:
        clone = layer_from_spec(layer.spec())
        assert clone.spec() == layer.spec()
    with pytest.raises(ValueError):
        layer_from_spec({"type": "nonsense"})
