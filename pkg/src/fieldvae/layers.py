"""Deterministic layer primitives with hand-derived backprop.

Every layer follows the same protocol: ``forward`` caches whatever the
backward pass needs, ``backward`` consumes an upstream gradient of the
scalar loss w.r.t. the layer output and returns the gradient w.r.t. the
layer input, accumulating parameter gradients into ``grads()`` slots.
All arrays are float64, shape (batch, features).
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


def he_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Fan-in scaled uniform init, suited to leaky-ReLU stacks."""
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Dense:
    """Affine map y = x W + b."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        if in_dim < 1 or out_dim < 1:
            raise ConfigError(f"dense dims must be >= 1, got {in_dim}x{out_dim}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.W = he_uniform(in_dim, out_dim, rng)
        self.b = np.zeros(out_dim)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.in_dim:
            raise ConfigError(f"dense expects {self.in_dim} input columns, "
                              f"got {x.shape[1]}")
        self._x = x
        return x @ self.W + self.b

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if grad_out.shape != (self._x.shape[0], self.out_dim):
            raise ConfigError(f"dense upstream gradient shape {grad_out.shape} "
                              f"!= {(self._x.shape[0], self.out_dim)}")
        self.dW = self._x.T @ grad_out
        self.db = grad_out.sum(axis=0)
        return grad_out @ self.W.T

    def params(self):
        return [self.W, self.b]

    def grads(self):
        return [self.dW, self.db]


class BatchNorm:
    """Per-feature batch normalization with running statistics.

    Train mode standardizes each column with batch statistics and updates
    the running mean/variance by exponential moving average; infer mode
    uses the running statistics. Train mode needs a batch of at least 2.
    """

    def __init__(self, dim: int, momentum: float = 0.99, eps: float = 1e-5):
        if not 0.0 < momentum < 1.0:
            raise ConfigError(f"batch-norm momentum must be in (0,1), got {momentum}")
        if eps <= 0.0:
            raise ConfigError(f"batch-norm epsilon must be > 0, got {eps}")
        self.dim = dim
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(dim)
        self.beta = np.zeros(dim)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.dgamma = np.zeros(dim)
        self.dbeta = np.zeros(dim)
        self._cache = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        if x.shape[1] != self.dim:
            raise ConfigError(f"batch-norm expects {self.dim} columns, got {x.shape[1]}")
        if training:
            if x.shape[0] < 2:
                raise ConfigError("batch-norm train mode needs a batch of >= 2 rows")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            x_hat = (x - mean) * inv_std
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
            self._cache = ("train", x_hat, inv_std)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            x_hat = (x - self.running_mean) * inv_std
            self._cache = ("infer", x_hat, inv_std)
        return self.gamma * x_hat + self.beta

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        mode, x_hat, inv_std = self._cache
        self.dgamma = (grad_out * x_hat).sum(axis=0)
        self.dbeta = grad_out.sum(axis=0)
        dx_hat = grad_out * self.gamma
        if mode == "infer":
            # running stats are constants, so the map is a fixed affine one
            return dx_hat * inv_std
        n = grad_out.shape[0]
        # full train-mode gradient including the batch-statistics terms
        return (inv_std / n) * (n * dx_hat
                                - dx_hat.sum(axis=0)
                                - x_hat * (dx_hat * x_hat).sum(axis=0))

    def params(self):
        return [self.gamma, self.beta]

    def grads(self):
        return [self.dgamma, self.dbeta]


class LeakyReLU:
    """max(x, slope*x) with 0 < slope < 1; gradient 1 for x >= 0, else slope."""

    def __init__(self, slope: float = 0.2):
        if not 0.0 < slope < 1.0:
            raise ConfigError(f"leaky-ReLU slope must be in (0,1), got {slope}")
        self.slope = slope
        self._pos = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._pos = x >= 0.0
        return np.where(self._pos, x, self.slope * x)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return np.where(self._pos, grad_out, self.slope * grad_out)

    def params(self):
        return []

    def grads(self):
        return []


class Dropout:
    """Inverted dropout: zero elements with probability ``rate``, scale
    survivors by 1/(1-rate) so the expectation is preserved.

    ``active`` is decoupled from train/infer because stochastic inference
    (Monte Carlo prediction) runs with dropout on.
    """

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0,1), got {rate}")
        self.rate = rate
        self.mask = None

    def forward(self, x: np.ndarray, active: bool,
                rng: np.random.Generator | None = None) -> np.ndarray:
        if not active or self.rate == 0.0:
            self.mask = np.ones_like(x)
            return x
        if rng is None:
            raise ConfigError("active dropout requires an RNG stream")
        keep = rng.random(x.shape) >= self.rate
        self.mask = keep / (1.0 - self.rate)
        return x * self.mask

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out * self.mask

    def params(self):
        return []

    def grads(self):
        return []
