"""The spectrogram classifier: stack assembly, training, evaluation.

The network is a small CNN over 1x128x128 spectrograms: a 3x3 stem,
then six asymmetric convolution blocks with Swish activations and a
2x2/stride-2 max pool after every second block, global average pooling
and a linear head over the 9 compound classes.  Two presets are wired
in: "desk" trains in minutes on a laptop core, "full" reproduces the
reference channel widths (about 1.8M parameters).
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import LoadedDataset
from .nn import (
    AcbBlock,
    Adam,
    BatchNorm2d,
    Conv2d,
    GlobalAvgPool,
    Linear,
    MaxPool2x2,
    Model,
    Swish,
    count_flops,
    count_params,
    softmax_cross_entropy,
)
from .rng import Rng, mix64
from .signals import NUM_CLASSES

_EPOCH_KEY = 0x45504F43  # stream tag for per-epoch shuffles


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class NetConfig:
    preset: str = "desk"
    stem_channels: int = 16
    channel_plan: tuple = (16, 16, 32, 32, 64, 64)
    fc_hidden: int = 0
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        if len(self.channel_plan) != 6:
            raise ValueError(f"channel_plan must list 6 block widths, got {self.channel_plan}")


PRESETS = {
    "desk": NetConfig(preset="desk"),
    "full": NetConfig(preset="full", channel_plan=(16, 32, 64, 128, 256, 256), fc_hidden=512),
}


def preset_config(name: str) -> NetConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}, expected one of {sorted(PRESETS)}")
    return PRESETS[name]


def build_classifier(cfg: NetConfig, seed: int = 0, dtype=np.float32) -> Model:
    """Assemble the stack with Glorot-uniform init from a single seed."""
    rng = Rng(seed)
    layers = [
        Conv2d(1, cfg.stem_channels, (3, 3), 1, (1, 1), rng, dtype),
        BatchNorm2d(cfg.stem_channels, dtype=dtype),
        Swish(),
        MaxPool2x2(),
    ]
    in_ch = cfg.stem_channels
    for i, out_ch in enumerate(cfg.channel_plan, start=1):
        layers.append(AcbBlock(in_ch, out_ch, 1, rng, dtype))
        layers.append(Swish())
        if i % 2 == 0:
            layers.append(MaxPool2x2())
        in_ch = out_ch
    layers.append(GlobalAvgPool())
    if cfg.fc_hidden:
        layers.append(Linear(in_ch, cfg.fc_hidden, rng, dtype))
        layers.append(Swish())
        in_ch = cfg.fc_hidden
    layers.append(Linear(in_ch, cfg.num_classes, rng, dtype))
    return Model(layers)


def fuse_model(model: Model) -> Model:
    """Inference twin: every ACB folded to its single 3x3 convolution.

    Non-ACB layers are shared with the original, so this is cheap; use
    the twin for eval-mode prediction only.
    """
    fused = Model([layer.fuse() if isinstance(layer, AcbBlock) else layer
                   for layer in model.layers])
    fused.set_training(False)
    return fused


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    batch_size: int = 64
    lr: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def _batches(order: np.ndarray, size: int):
    for i in range(0, order.size, size):
        yield order[i:i + size]


def train(model: Model, data: LoadedDataset, split, tc: TrainConfig,
          adam: Adam | None = None, log=None) -> list[dict]:
    """Minibatch Adam training; returns the per-epoch trace.

    The sample order is reshuffled every epoch from a stream derived
    from (seed, epoch), so a fixed seed pins the whole run.  Each trace
    row carries the epoch's mean train loss and the test overall
    accuracy measured in eval mode.
    """
    train_idx, test_idx = split
    train_idx = np.asarray(train_idx, dtype=np.int64)
    test_idx = np.asarray(test_idx, dtype=np.int64)
    if adam is None:
        adam = Adam(lr=tc.lr)
    x_all = data.pixels[:, None, :, :]
    y_all = data.labels
    trace: list[dict] = []
    for epoch in range(1, tc.epochs + 1):
        order = train_idx[Rng(mix64(tc.seed, _EPOCH_KEY, epoch)).permutation(train_idx.size)]
        model.set_training(True)
        loss_sum = 0.0
        for bi, batch in enumerate(_batches(order, tc.batch_size)):
            logits = model.forward(x_all[batch])
            loss, g = softmax_cross_entropy(logits, y_all[batch])
            if not math.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} at epoch {epoch}, batch {bi}")
            model.backward(g)
            adam.step(model.named_params(), model.named_grads())
            loss_sum += loss * batch.size
        report = evaluate(model, data, test_idx, batch_size=tc.batch_size)
        row = {"epoch": epoch, "train_loss": loss_sum / train_idx.size, "test_oa": report.oa}
        trace.append(row)
        if log:
            log(f"epoch {epoch:3d}  loss {row['train_loss']:.4f}  test OA {row['test_oa']:.4f}")
    return trace


def oa_from_confusion(conf: np.ndarray) -> float:
    total = int(conf.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    return float(np.trace(conf) / total)


def kappa_from_confusion(conf: np.ndarray) -> float:
    """Chance-corrected agreement: (OA - p_e) / (1 - p_e) with
    p_e = sum_i rowsum_i * colsum_i / total^2."""
    total = int(conf.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    oa = float(np.trace(conf) / total)
    pe = float(int(conf.sum(axis=1) @ conf.sum(axis=0)) / total**2)
    if pe == 1.0:
        return 1.0 if oa == 1.0 else 0.0
    return (oa - pe) / (1.0 - pe)


@dataclass
class EvalReport:
    confusion: np.ndarray
    oa: float
    kappa: float
    per_jnr: dict = field(default_factory=dict)
    per_pr: dict = field(default_factory=dict)
    flops: int = 0
    fused_flops: int = 0
    params: int = 0
    time_ms_mean: float = float("nan")
    time_ms_std: float = float("nan")


def predict(model: Model, pixels: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Eval-mode argmax labels; ties resolve to the lowest class index."""
    model.set_training(False)
    out = np.empty(pixels.shape[0], dtype=np.int64)
    x_all = pixels[:, None, :, :]
    for i in range(0, pixels.shape[0], batch_size):
        logits = model.forward(x_all[i:i + batch_size])
        out[i:i + batch_size] = np.argmax(logits, axis=1)
    return out


def evaluate(model: Model, data: LoadedDataset, indices, batch_size: int = 64,
             num_classes: int = NUM_CLASSES) -> EvalReport:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("evaluate needs at least one sample")
    preds = predict(model, data.pixels[indices], batch_size)
    truth = data.labels[indices]
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(conf, (truth, preds), 1)
    report = EvalReport(confusion=conf, oa=oa_from_confusion(conf),
                        kappa=kappa_from_confusion(conf))
    jnr = np.asarray([data.records[i]["jnr_db"] for i in indices])
    pr = np.asarray([data.records[i]["pr_db"] for i in indices])
    correct = preds == truth
    for v in sorted(set(jnr.tolist())):
        sel = jnr == v
        report.per_jnr[v] = float(correct[sel].mean())
    for v in sorted(set(pr.tolist())):
        sel = pr == v
        report.per_pr[v] = float(correct[sel].mean())
    return report


def report_complexity(model: Model, input_shape=(1, 128, 128), repeats: int = 100,
                      warmup: int = 10) -> dict:
    """FLOPs/params plus wall-clock stats for single-sample fused inference."""
    fused = fuse_model(model)
    x = np.zeros((1,) + tuple(input_shape), dtype=np.float32)
    for _ in range(warmup):
        fused.forward(x)
    times = np.empty(repeats)
    for i in range(repeats):
        t0 = time.perf_counter()
        fused.forward(x)
        times[i] = time.perf_counter() - t0
    return {
        "flops": count_flops(model, input_shape),
        "fused_flops": count_flops(fused, input_shape),
        "params": count_params(model),
        "time_ms_mean": float(times.mean() * 1e3),
        "time_ms_std": float(times.std() * 1e3),
    }


def write_confusion_csv(path, conf: np.ndarray) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["true_class"] + [f"pred_{j}" for j in range(conf.shape[1])])
        for i, row in enumerate(conf):
            w.writerow([i] + [int(v) for v in row])


def write_metrics_csv(path, report: EvalReport) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["oa", "kappa", "flops", "fused_flops", "params",
                    "time_ms_mean", "time_ms_std"])
        w.writerow([f"{report.oa:.6f}", f"{report.kappa:.6f}", report.flops,
                    report.fused_flops, report.params,
                    f"{report.time_ms_mean:.4f}", f"{report.time_ms_std:.4f}"])


def write_group_csv(path, mapping: dict, key_name: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([key_name, "oa"])
        for k in sorted(mapping):
            w.writerow([k, f"{mapping[k]:.6f}"])


def write_trace_csv(path, trace: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "train_loss", "test_oa"])
        for row in trace:
            w.writerow([row["epoch"], f"{row['train_loss']:.6f}", f"{row['test_oa']:.6f}"])
