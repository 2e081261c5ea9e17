"""Overall accuracy and Cohen's kappa against brute-force re-derivations."""

import numpy as np
import pytest

from jamforge import (
    LoadedDataset,
    evaluate,
    kappa_from_confusion,
    oa_from_confusion,
    predict,
)
from jamforge.dataset import DatasetConfig
from jamforge.nn import Layer, Model


def _oa_brute(conf):
    rows = [[int(v) for v in row] for row in conf]
    total = sum(sum(r) for r in rows)
    trace = sum(rows[i][i] for i in range(len(rows)))
    return trace / total


def _kappa_brute(conf):
    rows = [[int(v) for v in row] for row in conf]
    k = len(rows)
    total = sum(sum(r) for r in rows)
    oa = sum(rows[i][i] for i in range(k)) / total
    pe = sum(sum(rows[i]) * sum(rows[j][i] for j in range(k)) for i in range(k)) / total**2
    if pe == 1.0:
        return 1.0 if oa == 1.0 else 0.0
    return (oa - pe) / (1.0 - pe)


def test_textbook_confusion():
    conf = np.array([[40, 10], [20, 30]], dtype=np.int64)
    assert oa_from_confusion(conf) == 0.7
    assert kappa_from_confusion(conf) == pytest.approx(0.4, abs=1e-12)


def test_random_confusions_match_brute_force_exactly():
    rng = np.random.default_rng(42)
    for trial in range(100):
        k = int(rng.integers(2, 10))
        conf = rng.integers(0, 50, size=(k, k)).astype(np.int64)
        if conf.sum() == 0:
            conf[0, 0] = 1
        assert oa_from_confusion(conf) == _oa_brute(conf), f"trial {trial}"
        assert kappa_from_confusion(conf) == _kappa_brute(conf), f"trial {trial}"


def test_perfect_single_class_confusion():
    # all mass on one diagonal cell makes p_e hit 1; kappa degenerates to 1
    conf = np.zeros((3, 3), dtype=np.int64)
    conf[1, 1] = 7
    assert oa_from_confusion(conf) == 1.0
    assert kappa_from_confusion(conf) == 1.0


def test_perfect_and_uniform_edges():
    eye = np.eye(4, dtype=np.int64) * 5
    assert oa_from_confusion(eye) == 1.0
    assert kappa_from_confusion(eye) == 1.0
    flat = np.full((3, 3), 4, dtype=np.int64)
    assert oa_from_confusion(flat) == pytest.approx(1 / 3)
    assert kappa_from_confusion(flat) == pytest.approx(0.0, abs=1e-15)


def test_empty_confusion_rejected():
    with pytest.raises(ValueError, match="empty"):
        oa_from_confusion(np.zeros((9, 9), dtype=np.int64))
    with pytest.raises(ValueError, match="empty"):
        kappa_from_confusion(np.zeros((2, 2), dtype=np.int64))


class _Readout(Layer):
    """Maps (N, 1, 1, K) input straight to (N, K) logits."""

    def forward(self, x):
        return x[:, 0, 0, :]

    def backward(self, g):
        return g[:, None, None, :]

    def output_shape(self, in_shape):
        return (in_shape[-1],)


def _toy_dataset(logit_rows, labels, jnrs, prs):
    pixels = np.asarray(logit_rows, dtype=np.float32)[:, None, :]
    records = [{"class_id": int(l), "jnr_db": j, "pr_db": p}
               for l, j, p in zip(labels, jnrs, prs)]
    return LoadedDataset(
        pixels=pixels,
        labels=np.asarray(labels, dtype=np.int64),
        records=records,
        config=DatasetConfig(),
        header={},
    )


def test_predict_breaks_ties_toward_lowest_class():
    model = Model([_Readout()])
    x = np.zeros((3, 1, 1, 4), dtype=np.float32)
    x[0, 0, 0] = [1.0, 1.0, 0.0, 0.0]
    x[1, 0, 0] = [0.0, 2.0, 2.0, 2.0]
    x[2, 0, 0] = [-1.0, -1.0, -1.0, -1.0]
    assert predict(model, x[:, 0], batch_size=2).tolist() == [0, 1, 0]


def test_evaluate_confusion_and_group_breakdowns():
    # 6 samples, 3 classes; logits put sample i in class argmax(row)
    rows = [
        [9.0, 0.0, 0.0],  # pred 0, true 0, jnr  0, pr -5  -> hit
        [0.0, 9.0, 0.0],  # pred 1, true 0, jnr  0, pr  5  -> miss
        [0.0, 9.0, 0.0],  # pred 1, true 1, jnr 10, pr -5  -> hit
        [0.0, 0.0, 9.0],  # pred 2, true 1, jnr 10, pr  5  -> miss
        [0.0, 0.0, 9.0],  # pred 2, true 2, jnr  0, pr -5  -> hit
        [9.0, 0.0, 0.0],  # pred 0, true 2, jnr 10, pr  5  -> miss
    ]
    labels = [0, 0, 1, 1, 2, 2]
    jnrs = [0.0, 0.0, 10.0, 10.0, 0.0, 10.0]
    prs = [-5.0, 5.0, -5.0, 5.0, -5.0, 5.0]
    data = _toy_dataset(rows, labels, jnrs, prs)
    model = Model([_Readout()])

    report = evaluate(model, data, np.arange(6), num_classes=3)
    expected = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]], dtype=np.int64)
    assert np.array_equal(report.confusion, expected)
    assert report.oa == 0.5
    assert report.kappa == pytest.approx(_kappa_brute(expected))
    assert report.per_jnr == {0.0: pytest.approx(2 / 3), 10.0: pytest.approx(1 / 3)}
    assert report.per_pr == {-5.0: 1.0, 5.0: 0.0}

    # weighted mean of per-JNR accuracies reproduces overall accuracy
    weights = {0.0: 3, 10.0: 3}
    of_groups = sum(report.per_jnr[k] * w for k, w in weights.items()) / 6
    assert of_groups == pytest.approx(report.oa, abs=1e-12)


def test_evaluate_subset_indices():
    rows = [[9.0, 0.0], [9.0, 0.0], [0.0, 9.0]]
    data = _toy_dataset(rows, [0, 1, 1], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    model = Model([_Readout()])
    report = evaluate(model, data, [0, 2], num_classes=2)
    assert report.oa == 1.0
    with pytest.raises(ValueError, match="at least one"):
        evaluate(model, data, [], num_classes=2)
