"""Multiply-add and parameter accounting.

Convolutions cost 2 * Hout * Wout * kh * kw * Cin * Cout (multiplies
plus adds over the output map), fully connected layers
(2 * Cin - 1) * Cout; normalization, activations and pooling are
counted as free.
"""

from __future__ import annotations

from .layers import Model


def count_flops(model: Model, input_shape=(1, 128, 128)) -> int:
    total = 0
    shape = tuple(input_shape)
    for layer in model.layers:
        total += layer.flops(shape)
        shape = layer.output_shape(shape)
    return total


def count_params(model: Model) -> int:
    """Trainable parameters only; batchnorm running stats excluded."""
    return sum(int(p.size) for _, p in model.named_params())
