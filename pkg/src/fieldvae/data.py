"""Labeled datasets over the proxy field: sampling, normalization, and the
CSV + JSON-sidecar persistence format.

CSV: header ``x000,...,x089,y``, one row per sample, shortest round-trip
decimal text (parse-back gives bit-identical float64). The sidecar JSON
carries normalization statistics, bounds, split indices, and provenance;
rerunning with the same config and seed reproduces both files byte for
byte.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import proxy
from .de import de_init, de_step
from .errors import ConfigError, DataError
from .utils import rng_from_seed

HOLDOUT_FRACTION = 0.2
SIDECAR_VERSION = 1


@dataclass
class Normalizer:
    """Per-feature and target z-scoring fitted on the training split.

    Zero-variance features are excluded from scaling (identity transform)
    with a warning; their mask is persisted so transforms replay exactly.
    """

    feature_mean: np.ndarray
    feature_std: np.ndarray
    target_mean: float
    target_std: float
    scaled: np.ndarray  # bool mask; False = excluded zero-variance column

    @classmethod
    def fit(cls, features: np.ndarray, targets: np.ndarray,
            target_scale: float = 1.0) -> "Normalizer":
        """Fit feature and target statistics.

        ``target_scale`` sets the standard deviation of the transformed
        targets (default 1). Production optimization datasets are usually
        scaled by a fixed round constant rather than to unit variance, so
        the regression-loss weight gamma acts on a larger-variance target;
        target_scale reproduces that convention while keeping the
        transform affine and exactly invertible.
        """
        if target_scale <= 0.0:
            raise DataError(f"target_scale must be > 0, got {target_scale}")
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        scaled = std > 0.0
        if not np.all(scaled):
            warnings.warn(f"{int(np.sum(~scaled))} zero-variance feature(s) "
                          "excluded from scaling")
            mean = np.where(scaled, mean, 0.0)
            std = np.where(scaled, std, 1.0)
        t_std = float(np.std(targets))
        if t_std == 0.0:
            if targets.size > 1:
                raise DataError("targets have zero variance; nothing to learn")
            # single-sample split: center on the one value, leave scale at 1
            warnings.warn("single-sample split: target left unscaled")
            t_std = 1.0
        return cls(feature_mean=mean, feature_std=std,
                   target_mean=float(np.mean(targets)),
                   target_std=t_std / target_scale, scaled=scaled)

    def transform_features(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.feature_mean) / self.feature_std

    def inverse_features(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.feature_std + self.feature_mean

    def transform_target(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def inverse_target(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=np.float64) * self.target_std + self.target_mean

    def to_dict(self) -> dict:
        return {"feature_mean": self.feature_mean.tolist(),
                "feature_std": self.feature_std.tolist(),
                "target_mean": self.target_mean,
                "target_std": self.target_std,
                "scaled": self.scaled.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(feature_mean=np.asarray(d["feature_mean"], dtype=np.float64),
                   feature_std=np.asarray(d["feature_std"], dtype=np.float64),
                   target_mean=float(d["target_mean"]),
                   target_std=float(d["target_std"]),
                   scaled=np.asarray(d["scaled"], dtype=bool))

    def close_to(self, other: "Normalizer", tol: float = 1e-9) -> bool:
        return (np.allclose(self.feature_mean, other.feature_mean, atol=tol)
                and np.allclose(self.feature_std, other.feature_std, atol=tol)
                and math.isclose(self.target_mean, other.target_mean, abs_tol=tol)
                and math.isclose(self.target_std, other.target_std, abs_tol=tol)
                and np.array_equal(self.scaled, other.scaled))


@dataclass
class LabeledDataset:
    features: np.ndarray       # (N, 90) raw decision vectors
    targets: np.ndarray        # (N,) raw objective values
    train_idx: np.ndarray
    holdout_idx: np.ndarray
    normalizer: Normalizer
    meta: dict

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def train_arrays(self):
        """Normalized (features, targets) of the training split."""
        return (self.normalizer.transform_features(self.features[self.train_idx]),
                self.normalizer.transform_target(self.targets[self.train_idx]))

    def holdout_arrays(self):
        return (self.normalizer.transform_features(self.features[self.holdout_idx]),
                self.normalizer.transform_target(self.targets[self.holdout_idx]))


def _uniform_samples(n: int, bounds: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(bounds[:, 0], bounds[:, 1], size=(n, bounds.shape[0]))


def _optimizer_trace_samples(n: int, bounds: np.ndarray, fld: proxy.ProxyField,
                             objective: str, econ, rng: np.random.Generator,
                             pop_size: int = 30, run_generations: int = 150) -> np.ndarray:
    """Short evolutionary searches, keeping every evaluated point. The
    selection pressure skews sample density toward high objective values,
    the way a harvested optimization-study dataset is skewed."""
    collected = []
    total = 0
    evaluate = lambda d: proxy.objective_batch(d, fld, objective, econ)
    while total < n:
        pop = de_init(bounds, pop_size, rng)
        vals = evaluate(pop)
        collected.append(pop.copy())
        total += pop_size
        for _ in range(run_generations):
            if total >= n:
                break
            pop, vals, trials, _ = de_step(pop, vals, evaluate, bounds,
                                           0.7, 0.9, rng)
            collected.append(trials)
            total += pop_size
    return np.concatenate(collected, axis=0)[:n]


def generate_dataset(n: int, fld: proxy.ProxyField, objective: str,
                     sampler: str = "uniform", noise_std: float = 0.0,
                     seed: int = 0,
                     econ: proxy.EconomicParams | None = None,
                     trace_pop_size: int = 30,
                     trace_generations: int = 150,
                     target_scale: float = 1.0) -> LabeledDataset:
    """Sample n labeled (decision, objective) pairs from the proxy.

    sampler 'uniform' draws decisions uniformly within bounds;
    'optimizer-trace' harvests all points evaluated by short DE searches.
    With noise_std > 0 the labels carry relative Gaussian noise. The
    dataset is split 80/20 into train/holdout and carries normalization
    statistics fitted on the training split.
    """
    if n < 1:
        raise ConfigError(f"dataset size must be >= 1, got {n}")
    if objective not in ("wcf", "npv"):
        raise ConfigError(f"objective must be 'wcf' or 'npv', got {objective!r}")
    bounds = proxy.decision_bounds()
    rng = rng_from_seed(seed)
    if sampler == "uniform":
        features = _uniform_samples(n, bounds, rng)
    elif sampler == "optimizer-trace":
        features = _optimizer_trace_samples(n, bounds, fld, objective, econ,
                                            rng, pop_size=trace_pop_size,
                                            run_generations=trace_generations)
    else:
        raise ConfigError(f"sampler must be 'uniform' or 'optimizer-trace', "
                          f"got {sampler!r}")
    targets = proxy.objective_batch(features, fld, objective, econ,
                                    noise_std=noise_std, seed=seed)
    n_holdout = int(round(n * HOLDOUT_FRACTION))
    perm = rng.permutation(n)
    holdout_idx = np.sort(perm[:n_holdout])
    train_idx = np.sort(perm[n_holdout:])
    normalizer = Normalizer.fit(features[train_idx], targets[train_idx],
                                target_scale=target_scale)
    meta = {"objective": objective, "sampler": sampler, "noise_std": noise_std,
            "seed": seed, "field_seed": fld.seed, "n": n,
            "target_scale": target_scale,
            "econ": econ.to_dict() if econ is not None else None}
    return LabeledDataset(features=features, targets=targets,
                          train_idx=train_idx, holdout_idx=holdout_idx,
                          normalizer=normalizer, meta=meta)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _format_row(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def save_dataset(ds: LabeledDataset, csv_path, sidecar_path) -> None:
    dim = ds.features.shape[1]
    header = ",".join([f"x{i:03d}" for i in range(dim)] + ["y"])
    with open(csv_path, "w") as f:
        f.write(header + "\n")
        for row, y in zip(ds.features, ds.targets):
            f.write(_format_row(row) + "," + repr(float(y)) + "\n")
    sidecar = {
        "format_version": SIDECAR_VERSION,
        "csv_columns": dim + 1,
        "n": ds.n,
        "meta": ds.meta,
        "bounds": proxy.decision_bounds().tolist(),
        "normalization": ds.normalizer.to_dict(),
        "train_idx": ds.train_idx.tolist(),
        "holdout_idx": ds.holdout_idx.tolist(),
    }
    with open(sidecar_path, "w") as f:
        json.dump(sidecar, f, sort_keys=True, indent=1)


def load_dataset(csv_path, sidecar_path) -> LabeledDataset:
    try:
        with open(sidecar_path) as f:
            sidecar = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read dataset sidecar {sidecar_path}: {e}") from e
    if sidecar.get("format_version") != SIDECAR_VERSION:
        raise DataError(f"unsupported dataset sidecar version: "
                        f"{sidecar.get('format_version')}")
    try:
        raw = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read dataset CSV {csv_path}: {e}") from e
    if raw.shape[0] != sidecar["n"] or raw.shape[1] != sidecar["csv_columns"]:
        raise DataError(f"dataset CSV shape {raw.shape} does not match sidecar "
                        f"({sidecar['n']} x {sidecar['csv_columns']})")
    return LabeledDataset(
        features=raw[:, :-1], targets=raw[:, -1],
        train_idx=np.asarray(sidecar["train_idx"], dtype=np.int64),
        holdout_idx=np.asarray(sidecar["holdout_idx"], dtype=np.int64),
        normalizer=Normalizer.from_dict(sidecar["normalization"]),
        meta=sidecar["meta"])
