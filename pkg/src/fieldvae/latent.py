"""Latent-space parameterizations: mean-field Gaussian and full-covariance
multivariate normal, with KL to a standard-normal prior, sampling, and the
gradients the training loop needs.

Functional forms accept either a single posterior (1-D mean) or a batch
(leading axis). The head classes wrap them for use inside the model: they
consume the raw encoder head output and backpropagate into it.
"""

from __future__ import annotations

import numpy as np

LOGVAR_CLAMP = 10.0     # log-variance clipped to [-10, 10] before exp
CHOL_DIAG_FLOOR = 1e-6  # keeps the Cholesky diagonal strictly positive


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def clamp_log_var(log_var: np.ndarray) -> np.ndarray:
    return np.clip(log_var, -LOGVAR_CLAMP, LOGVAR_CLAMP)


# ---------------------------------------------------------------------------
# mean-field diagonal Gaussian
# ---------------------------------------------------------------------------

def meanfield_kl(mean: np.ndarray, log_var: np.ndarray) -> np.ndarray:
    """KL(N(mu, diag(sigma^2)) || N(0, I)) summed over latent dimensions.

    Closed form: -0.5 * sum_j (1 + log sigma_j^2 - mu_j^2 - sigma_j^2).
    Returns a scalar for 1-D input, a vector for batched input.
    """
    lv = clamp_log_var(np.asarray(log_var, dtype=np.float64))
    mu = np.asarray(mean, dtype=np.float64)
    kl = -0.5 * np.sum(1.0 + lv - mu * mu - np.exp(lv), axis=-1)
    # the closed form is nonnegative; clip away -0.0 and rounding dust
    return np.maximum(kl, 0.0)


def meanfield_sample(mean: np.ndarray, log_var: np.ndarray,
                     noise: np.ndarray) -> np.ndarray:
    """Reparameterized draw z = mu + sigma * eps."""
    lv = clamp_log_var(np.asarray(log_var, dtype=np.float64))
    return np.asarray(mean, dtype=np.float64) + np.exp(0.5 * lv) * noise


# ---------------------------------------------------------------------------
# full-covariance multivariate normal via Cholesky factor
# ---------------------------------------------------------------------------

def tril_size(dim: int) -> int:
    return dim * (dim + 1) // 2


def chol_parameterize(raw: np.ndarray, dim: int) -> np.ndarray:
    """Map an unconstrained vector of length dim*(dim+1)/2 to a lower-
    triangular factor with strictly positive diagonal.

    Off-diagonal entries pass through; diagonal entries go through
    softplus plus a 1e-6 floor, so the factor is always valid and the map
    stays differentiable.
    """
    raw = np.asarray(raw, dtype=np.float64)
    rows, cols = np.tril_indices(dim)
    diag = rows == cols
    vals = np.where(diag, softplus(raw) + CHOL_DIAG_FLOOR, raw)
    L = np.zeros(raw.shape[:-1] + (dim, dim))
    L[..., rows, cols] = vals
    return L


def chol_parameterize_grad(raw: np.ndarray, dim: int,
                           dL: np.ndarray) -> np.ndarray:
    """Backprop dL (gradient w.r.t. the factor) to the raw vector."""
    raw = np.asarray(raw, dtype=np.float64)
    rows, cols = np.tril_indices(dim)
    diag = rows == cols
    dvals = dL[..., rows, cols]
    return np.where(diag, dvals * _sigmoid(raw), dvals)


def fullcov_kl(mean: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """KL(N(mu, L L^T) || N(0, I)) via the standard closed form

        0.5 * (tr(L L^T) + mu^T mu - J) - sum_j log L_jj

    which reduces exactly to the mean-field form when L is diagonal.
    """
    mu = np.asarray(mean, dtype=np.float64)
    L = np.asarray(chol, dtype=np.float64)
    j = mu.shape[-1]
    diag = np.diagonal(L, axis1=-2, axis2=-1)
    if np.any(diag <= 0.0):
        raise ValueError("Cholesky factor must have a strictly positive diagonal")
    kl = 0.5 * (np.sum(L * L, axis=(-2, -1)) + np.sum(mu * mu, axis=-1) - j) \
        - np.sum(np.log(diag), axis=-1)
    return np.maximum(kl, 0.0)


def fullcov_sample(mean: np.ndarray, chol: np.ndarray,
                   noise: np.ndarray) -> np.ndarray:
    """Joint draw z = mu + L eps; sample covariance converges to L L^T."""
    mu = np.asarray(mean, dtype=np.float64)
    L = np.asarray(chol, dtype=np.float64)
    return mu + np.einsum("...ij,...j->...i", L, noise)


# ---------------------------------------------------------------------------
# heads: encoder output -> (z, kl), with backprop
# ---------------------------------------------------------------------------

class MeanFieldHead:
    """Splits the encoder head output into (mu, log sigma^2) and samples by
    reparameterization."""

    kind = "meanfield"

    def __init__(self, latent_dim: int):
        self.latent_dim = latent_dim
        self._cache = None

    @property
    def head_width(self) -> int:
        return 2 * self.latent_dim

    def split(self, h: np.ndarray):
        mu = h[..., :self.latent_dim]
        lv = clamp_log_var(h[..., self.latent_dim:])
        return mu, lv

    def forward(self, h: np.ndarray, noise: np.ndarray | None,
                sample: bool, rng: np.random.Generator | None = None):
        j = self.latent_dim
        mu = h[:, :j]
        lv_raw = h[:, j:]
        lv = clamp_log_var(lv_raw)
        if sample:
            if noise is None:
                noise = rng.standard_normal((h.shape[0], j))
        else:
            noise = np.zeros((h.shape[0], j))
        sigma = np.exp(0.5 * lv)
        z = mu + sigma * noise
        kl = -0.5 * np.sum(1.0 + lv - mu * mu - np.exp(lv), axis=1)
        self._cache = (mu, lv, lv_raw, noise, sigma)
        return z, kl

    def backward(self, dz: np.ndarray, dkl: np.ndarray) -> np.ndarray:
        """dz: (N, J) gradient w.r.t. z; dkl: (N,) per-sample KL multiplier."""
        mu, lv, lv_raw, noise, sigma = self._cache
        dmu = dz + dkl[:, None] * mu
        dlv = dz * noise * 0.5 * sigma + dkl[:, None] * 0.5 * (np.exp(lv) - 1.0)
        inside = (lv_raw >= -LOGVAR_CLAMP) & (lv_raw <= LOGVAR_CLAMP)
        dlv = np.where(inside, dlv, 0.0)
        return np.concatenate([dmu, dlv], axis=1)


class FullCovHead:
    """Splits the encoder head output into (mu, raw Cholesky entries) and
    draws z directly from the joint distribution."""

    kind = "fullcov"

    def __init__(self, latent_dim: int):
        self.latent_dim = latent_dim
        self._cache = None

    @property
    def head_width(self) -> int:
        return self.latent_dim + tril_size(self.latent_dim)

    def split(self, h: np.ndarray):
        j = self.latent_dim
        return h[..., :j], chol_parameterize(h[..., j:], j)

    def forward(self, h: np.ndarray, noise: np.ndarray | None,
                sample: bool, rng: np.random.Generator | None = None):
        j = self.latent_dim
        mu = h[:, :j]
        raw = h[:, j:]
        L = chol_parameterize(raw, j)
        if sample:
            if noise is None:
                noise = rng.standard_normal((h.shape[0], j))
        else:
            noise = np.zeros((h.shape[0], j))
        z = mu + np.einsum("nij,nj->ni", L, noise)
        diag = np.diagonal(L, axis1=-2, axis2=-1)
        kl = 0.5 * (np.sum(L * L, axis=(1, 2)) + np.sum(mu * mu, axis=1) - j) \
            - np.sum(np.log(diag), axis=1)
        self._cache = (mu, raw, L, noise)
        return z, kl

    def backward(self, dz: np.ndarray, dkl: np.ndarray) -> np.ndarray:
        mu, raw, L, noise = self._cache
        j = self.latent_dim
        dmu = dz + dkl[:, None] * mu
        # z path: dL_ik = dz_i * eps_k; KL path: L off-diag, L_jj - 1/L_jj on diag
        dL = dz[:, :, None] * noise[:, None, :]
        dL += dkl[:, None, None] * L
        diag_idx = np.arange(j)
        Ldiag = L[:, diag_idx, diag_idx]
        dL[:, diag_idx, diag_idx] -= dkl[:, None] / Ldiag
        rows, cols = np.tril_indices(j)
        mask = np.zeros((j, j))
        mask[rows, cols] = 1.0
        dL *= mask
        draw = chol_parameterize_grad(raw, j, dL)
        return np.concatenate([dmu, draw], axis=1)


def make_head(kind: str, latent_dim: int):
    if kind == "meanfield":
        return MeanFieldHead(latent_dim)
    if kind == "fullcov":
        return FullCovHead(latent_dim)
    raise ValueError(f"unknown latent kind: {kind!r}")
