"""Variational dense layer: weights and biases carry factorized Gaussian
posteriors. A forward pass in "sample" mode draws one weight realization
(shared across the batch); "mean" mode collapses to a deterministic layer.
The layer's KL to its prior N(0, prior_std^2) enters the training loss as
a separately scaled regularizer.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .layers import he_uniform

# wide clamp: at the floor, sampled weights match the means to ~1e-11
VAR_LOGVAR_LO = -50.0
VAR_LOGVAR_HI = 10.0
INIT_LOG_VAR = -6.0


def _clamp(lv: np.ndarray) -> np.ndarray:
    return np.clip(lv, VAR_LOGVAR_LO, VAR_LOGVAR_HI)


def gaussian_kl_to_prior(mean: np.ndarray, log_var: np.ndarray,
                         prior_std: float) -> float:
    """Sum over elements of KL(N(m, s^2) || N(0, prior_std^2))."""
    lv = _clamp(np.asarray(log_var, dtype=np.float64))
    m = np.asarray(mean, dtype=np.float64)
    p2 = prior_std * prior_std
    kl = np.log(prior_std) - 0.5 * lv + (np.exp(lv) + m * m) / (2.0 * p2) - 0.5
    return float(np.sum(kl))


class VarDense:
    """Dense layer with Gaussian weight/bias posteriors."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 prior_std: float = 1.0):
        if prior_std <= 0.0:
            raise ConfigError(f"prior std must be > 0, got {prior_std}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.prior_std = prior_std
        self.W_mean = he_uniform(in_dim, out_dim, rng)
        self.W_log_var = np.full((in_dim, out_dim), INIT_LOG_VAR)
        self.b_mean = np.zeros(out_dim)
        self.b_log_var = np.full(out_dim, INIT_LOG_VAR)
        self.dW_mean = np.zeros_like(self.W_mean)
        self.dW_log_var = np.zeros_like(self.W_log_var)
        self.db_mean = np.zeros_like(self.b_mean)
        self.db_log_var = np.zeros_like(self.b_log_var)
        self._cache = None

    def forward(self, x: np.ndarray, sample: bool,
                rng: np.random.Generator | None = None,
                noise: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
        if x.shape[1] != self.in_dim:
            raise ConfigError(f"var-dense expects {self.in_dim} input columns, "
                              f"got {x.shape[1]}")
        if sample:
            if noise is None:
                noise = (rng.standard_normal(self.W_mean.shape),
                         rng.standard_normal(self.b_mean.shape))
            eps_w, eps_b = noise
            W = self.W_mean + np.exp(0.5 * _clamp(self.W_log_var)) * eps_w
            b = self.b_mean + np.exp(0.5 * _clamp(self.b_log_var)) * eps_b
        else:
            eps_w = np.zeros_like(self.W_mean)
            eps_b = np.zeros_like(self.b_mean)
            W, b = self.W_mean, self.b_mean
        self._cache = (x, W, eps_w, eps_b)
        return x @ W + b

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x, W, eps_w, eps_b = self._cache
        dW = x.T @ grad_out
        db = grad_out.sum(axis=0)
        self.dW_mean = dW
        self.db_mean = db
        # through W = m + exp(lv/2) * eps
        self.dW_log_var = dW * eps_w * 0.5 * np.exp(0.5 * _clamp(self.W_log_var))
        self.db_log_var = db * eps_b * 0.5 * np.exp(0.5 * _clamp(self.b_log_var))
        self._zero_clamped_grads()
        return grad_out @ W.T

    def kl(self) -> float:
        return (gaussian_kl_to_prior(self.W_mean, self.W_log_var, self.prior_std)
                + gaussian_kl_to_prior(self.b_mean, self.b_log_var, self.prior_std))

    def add_kl_grads(self, scale: float) -> None:
        """Accumulate d(scale * kl())/d(params) into the gradient slots."""
        p2 = self.prior_std * self.prior_std
        self.dW_mean += scale * self.W_mean / p2
        self.db_mean += scale * self.b_mean / p2
        wlv = _clamp(self.W_log_var)
        blv = _clamp(self.b_log_var)
        dw = scale * (-0.5 + np.exp(wlv) / (2.0 * p2))
        dbv = scale * (-0.5 + np.exp(blv) / (2.0 * p2))
        self.dW_log_var += np.where(self._inside(self.W_log_var), dw, 0.0)
        self.db_log_var += np.where(self._inside(self.b_log_var), dbv, 0.0)

    @staticmethod
    def _inside(lv: np.ndarray) -> np.ndarray:
        return (lv >= VAR_LOGVAR_LO) & (lv <= VAR_LOGVAR_HI)

    def _zero_clamped_grads(self) -> None:
        self.dW_log_var = np.where(self._inside(self.W_log_var),
                                   self.dW_log_var, 0.0)
        self.db_log_var = np.where(self._inside(self.b_log_var),
                                   self.db_log_var, 0.0)

    def params(self):
        return [self.W_mean, self.W_log_var, self.b_mean, self.b_log_var]

    def grads(self):
        return [self.dW_mean, self.dW_log_var, self.db_mean, self.db_log_var]
