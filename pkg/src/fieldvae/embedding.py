"""Latent-embedding extraction, 2-D projections (PCA and exact t-SNE), and
crossplot data export.

t-SNE is the exact O(N^2) variant with a per-point precision found by
binary search, early exaggeration, and momentum gradient descent; the
pairwise kernels come from the selected backend (compiled or numpy).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError
from .model import Model
from .utils import as_matrix, rng_from_seed

TSNE_MAX_POINTS = 5000


@dataclass
class EmbeddingSet:
    """Per-sample latent posterior means with their targets attached."""

    latents: np.ndarray   # (N, J)
    targets: np.ndarray   # (N,) standardized objective values
    meta: dict


@dataclass
class Projection2D:
    coords: np.ndarray    # (N, 2)
    method: str
    params: dict
    seed: int | None
    info: dict


def extract_embeddings(model: Model, features_normalized: np.ndarray,
                       targets_normalized: np.ndarray,
                       meta: dict | None = None) -> EmbeddingSet:
    """Encoder posterior means (no sampling noise), for color-coded plots."""
    x = as_matrix(features_normalized, "features")
    fr = model.forward(x, training=False)
    return EmbeddingSet(latents=fr.posterior_mean.copy(),
                        targets=np.asarray(targets_normalized,
                                           dtype=np.float64).reshape(-1),
                        meta=dict(meta or {}))


def pca_project(emb: EmbeddingSet) -> Projection2D:
    """Project onto the top-2 principal directions of the centered latents.

    Sign convention: the largest-magnitude loading of each component is
    made positive, so output is repeatable. Zero-variance directions are
    fine (rank-deficient covariance allowed).
    """
    z = emb.latents
    n = z.shape[0]
    if n <= 2:
        raise ConfigError(f"PCA projection needs more than 2 points, got {n}")
    centered = z - z.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:2]
    comps = eigvecs[:, order]
    for k in range(comps.shape[1]):
        pivot = np.argmax(np.abs(comps[:, k]))
        if comps[pivot, k] < 0:
            comps[:, k] = -comps[:, k]
    total = float(np.sum(np.maximum(eigvals, 0.0)))
    top = np.maximum(eigvals[order], 0.0)
    explained = (top / total).tolist() if total > 0 else [0.0, 0.0]
    return Projection2D(coords=centered @ comps, method="pca",
                        params={}, seed=None,
                        info={"explained_variance_ratio": explained})


def tsne_project(emb: EmbeddingSet, perplexity: float = 30.0,
                 iterations: int = 1000, seed: int = 0,
                 early_exaggeration: float = 12.0,
                 exaggeration_iters: int = 250,
                 learning_rate: float = 200.0,
                 momentum_start: float = 0.5,
                 momentum_final: float = 0.8,
                 momentum_switch_iter: int = 250,
                 entropy_tol: float = 1e-5) -> Projection2D:
    """Exact t-SNE of the latent embedding down to 2 dimensions."""
    z = emb.latents
    n = z.shape[0]
    if n > TSNE_MAX_POINTS:
        raise ConfigError(f"exact t-SNE is capped at {TSNE_MAX_POINTS} points, "
                          f"got {n}; subsample first")
    if not 5.0 <= perplexity <= (n - 1) / 3.0:
        raise ConfigError(f"perplexity must be in [5, (N-1)/3] = "
                          f"[5, {(n - 1) / 3.0:.1f}] for N={n}, got {perplexity}")
    if iterations < 1:
        raise ConfigError("iterations must be >= 1")

    sq = np.sum(z * z, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (z @ z.T), 0.0)
    cond, _, n_hit_cap = _kernels.conditional_probs(
        d2, np.log2(perplexity), tol=entropy_tol)
    P = (cond + cond.T) / (2.0 * n)

    rng = rng_from_seed(seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    _, initial_kl = _kernels.kl_grad(P, Y)
    velocity = np.zeros_like(Y)
    for it in range(iterations):
        p_eff = P * early_exaggeration if it < exaggeration_iters else P
        grad, _ = _kernels.kl_grad(p_eff, Y)
        momentum = momentum_start if it < momentum_switch_iter else momentum_final
        velocity = momentum * velocity - learning_rate * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)
    _, final_kl = _kernels.kl_grad(P, Y)

    params = {"perplexity": perplexity, "iterations": iterations,
              "early_exaggeration": early_exaggeration,
              "exaggeration_iters": exaggeration_iters,
              "learning_rate": learning_rate,
              "momentum_start": momentum_start,
              "momentum_final": momentum_final,
              "momentum_switch_iter": momentum_switch_iter,
              "entropy_tol": entropy_tol}
    return Projection2D(coords=Y, method="tsne", params=params, seed=seed,
                        info={"initial_kl": float(initial_kl),
                              "final_kl": float(final_kl),
                              "entropy_search_hit_cap": int(n_hit_cap),
                              "kernel_backend": _kernels.BACKEND})


# ---------------------------------------------------------------------------
# file emission
# ---------------------------------------------------------------------------

CROSSPLOT_HEADER = "truth,pred_mean,pred_std,split"
PROJECTION_HEADER = "id,dim1,dim2,target_scaled"


def export_crossplot(truth, pred_mean, pred_std, split_tags, path) -> None:
    """CSV of (truth, predictive mean, predictive std, split tag) rows at
    full precision; parsing the file back reproduces the values exactly."""
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    pred_mean = np.asarray(pred_mean, dtype=np.float64).reshape(-1)
    pred_std = np.asarray(pred_std, dtype=np.float64).reshape(-1)
    if not len(truth) == len(pred_mean) == len(pred_std) == len(split_tags):
        raise ConfigError("crossplot columns disagree on length")
    if len(truth) == 0:
        raise ConfigError("crossplot export needs at least one row")
    with open(path, "w") as f:
        f.write(CROSSPLOT_HEADER + "\n")
        for t, m, s, tag in zip(truth, pred_mean, pred_std, split_tags):
            f.write(f"{float(t)!r},{float(m)!r},{float(s)!r},{tag}\n")


def export_projection(proj: Projection2D, targets_scaled, path) -> None:
    targets_scaled = np.asarray(targets_scaled, dtype=np.float64).reshape(-1)
    if len(targets_scaled) != proj.coords.shape[0]:
        raise ConfigError("projection and targets disagree on length")
    with open(path, "w") as f:
        f.write(PROJECTION_HEADER + "\n")
        for i, ((a, b), y) in enumerate(zip(proj.coords, targets_scaled)):
            f.write(f"{i},{float(a)!r},{float(b)!r},{float(y)!r}\n")
