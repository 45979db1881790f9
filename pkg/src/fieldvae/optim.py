"""Adam optimizer over a flat list of parameter arrays."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NumericError


class Adam:
    """Standard Adam with bias correction, updating parameters in place.

    State (first/second moments, step count) is kept per parameter array.
    A zero gradient leaves parameters untouched at every step count.
    """

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0.0:
            raise ConfigError(f"learning rate must be > 0, got {lr}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ConfigError(f"expected {len(self.params)} gradient arrays, "
                              f"got {len(grads)}")
        for p, g in zip(self.params, grads):
            if p.shape != g.shape:
                raise ConfigError(f"gradient shape {g.shape} != parameter "
                                  f"shape {p.shape}")
            if not np.all(np.isfinite(g)):
                raise NumericError("non-finite gradient in Adam step "
                                   f"(t={self.t + 1}, shape={g.shape})")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
