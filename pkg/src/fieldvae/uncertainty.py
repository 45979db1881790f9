"""Predictive uncertainty from repeated stochastic forward passes, the
accept-or-simulate gate, and the regression metrics.

For deterministic models the stochastic path is Monte Carlo dropout; for
probabilistic models every pass also resamples weights. Batch norm always
runs on its running statistics here so the spread is attributable to the
intended noise sources only. Passes are reduced in a fixed order, so a
fixed seed gives identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .model import Model


@dataclass
class UncertainPrediction:
    mean: float
    std: float
    samples: np.ndarray
    sample_count: int

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "UncertainPrediction":
        samples = np.asarray(samples, dtype=np.float64)
        if samples.size < 2:
            raise ConfigError("need at least 2 samples for an uncertainty "
                              "estimate")
        return cls(mean=float(np.mean(samples)),
                   std=float(np.std(samples, ddof=1)),
                   samples=samples, sample_count=samples.size)


@dataclass
class GateDecision:
    verdict: str            # "accept" | "simulate"
    threshold_used: float
    std_observed: float


def gate(pred: UncertainPrediction, threshold: float) -> GateDecision:
    """Accept iff std <= threshold; the boundary accepts."""
    if threshold < 0.0:
        raise ConfigError(f"gate threshold must be >= 0, got {threshold}")
    verdict = "accept" if pred.std <= threshold else "simulate"
    return GateDecision(verdict=verdict, threshold_used=threshold,
                        std_observed=pred.std)


def mc_predict_batch(model: Model, x: np.ndarray, n_samples: int, seed: int):
    """n_samples stochastic passes over the whole batch.

    Returns (means, stds, samples) with shapes (N,), (N,), (T, N); stds
    use the unbiased (T-1) estimator.
    """
    if n_samples < 2:
        raise ConfigError(f"need at least 2 MC samples, got {n_samples}")
    if not model.trained:
        raise DataError("refusing to predict with an untrained model; "
                        "train it or load a trained checkpoint")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    # deterministic models: dropout is the stochastic path, z stays at the
    # posterior mean; probabilistic models resample weights and latent too
    probabilistic = model.config.layer_kind == "probabilistic"
    streams = np.random.SeedSequence(seed).spawn(n_samples)
    samples = np.empty((n_samples, x.shape[0]))
    for t, ss in enumerate(streams):
        rng = np.random.Generator(np.random.PCG64(ss))
        fr = model.forward(x, training=False, rng=rng, dropout_active=True,
                           sample_latent=probabilistic,
                           sample_weights=probabilistic)
        samples[t] = fr.y_hat
    return samples.mean(axis=0), samples.std(axis=0, ddof=1), samples


def mc_predict(model: Model, x: np.ndarray, n_samples: int = 1000,
               seed: int = 0) -> UncertainPrediction:
    """Predictive distribution for a single decision vector."""
    _, _, samples = mc_predict_batch(model, np.atleast_2d(x), n_samples, seed)
    return UncertainPrediction.from_samples(samples[:, 0])


def mse(y: np.ndarray, y_hat: np.ndarray) -> float:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if y.size != y_hat.size or y.size < 1:
        raise ValueError(f"mse needs equal-length nonempty vectors, "
                         f"got {y.size} and {y_hat.size}")
    return float(np.mean((y - y_hat) ** 2))


def r2_score(y: np.ndarray, y_hat: np.ndarray) -> float:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if y.size != y_hat.size or y.size < 2:
        raise ValueError("r2_score needs equal-length vectors of size >= 2")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("r2_score undefined: y has zero variance")
    ss_res = float(np.sum((y - y_hat) ** 2))
    return 1.0 - ss_res / ss_tot
