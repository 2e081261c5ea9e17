from .layers import (
    AcbBlock,
    BatchNorm2d,
    Conv2d,
    GlobalAvgPool,
    Layer,
    Linear,
    MaxPool2x2,
    Model,
    Swish,
    glorot_uniform,
    layer_from_spec,
)
from .loss import softmax_cross_entropy
from .optim import Adam
from .complexity import count_flops, count_params
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint

__all__ = [
    "AcbBlock", "Adam", "BatchNorm2d", "CheckpointError", "Conv2d",
    "GlobalAvgPool", "Layer", "Linear", "MaxPool2x2", "Model", "Swish",
    "count_flops", "count_params", "glorot_uniform", "layer_from_spec",
    "load_checkpoint", "save_checkpoint", "softmax_cross_entropy",
]
