"""Adam with bias-corrected moment estimates.

m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2, then
p <- p - lr * m_hat / (sqrt(v_hat) + eps) with the usual 1 - b^t
corrections.  State is keyed by parameter name so it can round-trip
through checkpoints.
"""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        if not 0 <= beta1 < 1 or not 0 <= beta2 < 1:
            raise ValueError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, named_params, named_grads) -> None:
        """Apply one update in place.  Both lists must share name order."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for (name, p), (gname, g) in zip(named_params, named_grads):
            if name != gname:
                raise ValueError(f"parameter/gradient name mismatch: {name} vs {gname}")
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for parameter {name}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
