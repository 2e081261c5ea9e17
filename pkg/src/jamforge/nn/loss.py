"""Softmax cross-entropy with the max-subtraction stabilization."""

from __future__ import annotations

import numpy as np


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean negative log-likelihood and its gradient w.r.t. the logits.

    Returns (loss, grad) with grad = (softmax - onehot) / N, the exact
    derivative of the returned mean loss.
    """
    if logits.ndim != 2:
        raise ValueError(f"logits must be (N, V), got {logits.shape}")
    n, v = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ValueError(f"labels must be shape ({n},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= v:
        raise ValueError(f"labels must lie in [0, {v}), got range "
                         f"[{labels.min()}, {labels.max()}]")

    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsumexp
    loss = float(-logp[np.arange(n), labels].mean())

    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype)
