"""Pure numpy implementations of the t-SNE hot kernels.

Used as the fallback when the compiled extension is unavailable; both
backends implement the same two functions with identical semantics.
"""

from __future__ import annotations

import numpy as np

LOG2 = np.log(2.0)
Q_FLOOR = 1e-12


def conditional_probs(d2: np.ndarray, target_entropy_bits: float,
                      tol: float = 1e-5, max_iter: int = 100):
    """Per-row precisions by binary search so each conditional distribution
    p_{j|i} = exp(-beta_i d2_ij) / sum has entropy (bits) equal to the
    target within tol.

    d2 is the (N, N) squared-distance matrix; the diagonal is excluded.
    Returns (P, betas, n_hit_cap) where P holds the conditionals with a
    zero diagonal and n_hit_cap counts rows whose search hit max_iter.
    """
    n = d2.shape[0]
    P = np.zeros((n, n))
    betas = np.ones(n)
    n_hit_cap = 0
    idx = np.arange(n)
    for i in range(n):
        d = np.delete(d2[i], i)
        d = d - d.min()  # shift-invariant; avoids exp underflow of all terms
        beta, lo, hi = 1.0, 0.0, np.inf
        p = None
        for _ in range(max_iter):
            p = np.exp(-beta * d)
            s = p.sum()
            p /= s
            # H in nats: ln(s) + beta * sum(p * d); convert to bits
            h_bits = (np.log(s) + beta * np.dot(p, d)) / LOG2
            diff = h_bits - target_entropy_bits
            if abs(diff) <= tol:
                break
            if diff > 0.0:  # entropy too high -> sharpen
                lo = beta
                beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
        else:
            n_hit_cap += 1
        P[i, idx != i] = p
        betas[i] = beta
    return P, betas, n_hit_cap


def kl_grad(P: np.ndarray, Y: np.ndarray):
    """Gradient of KL(P || Q) w.r.t. the 2-D embedding Y under the
    Student-t kernel, and the KL value (nats).

    P is the symmetrized joint distribution (zero diagonal).
    """
    n = Y.shape[0]
    sq = np.sum(Y * Y, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T)
    W = 1.0 / (1.0 + d2)
    np.fill_diagonal(W, 0.0)
    s = W.sum()
    Q = np.maximum(W / s, Q_FLOOR)
    PQW = (P - W / s) * W
    grad = 4.0 * (PQW.sum(axis=1)[:, None] * Y - PQW @ Y)
    mask = P > 0.0
    kl = float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))
    return grad, kl
