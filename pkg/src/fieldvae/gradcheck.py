"""Finite-difference verification of analytic gradients.

The harness perturbs every parameter element by +-h, evaluates the loss
through a caller-supplied closure, and compares the central difference to
the analytic gradient. The loss closure must be deterministic: freeze
dropout masks and any sampling noise before checking.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def central_diff_grad(loss_fn: Callable[[], float], param: np.ndarray,
                      h: float = 1e-5) -> np.ndarray:
    """Numerical gradient of loss_fn w.r.t. every element of param."""
    grad = np.zeros_like(param)
    flat = param.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn()
        flat[i] = orig - h
        down = loss_fn()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray,
                  floor: float = 1e-4) -> float:
    """Worst-case |a - n| / max(|a|, |n|, floor) over all elements.

    The floor keeps structurally-zero gradients (where central differences
    return pure cancellation noise, ~|loss|*eps/h) from reading as huge
    relative errors: elements with both gradients below the floor are in
    effect compared absolutely at floor * tolerance.
    """
    diff = np.abs(analytic - numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(diff / denom)) if diff.size else 0.0


def gradient_check(loss_fn: Callable[[], float],
                   params: Sequence[np.ndarray],
                   analytic_grads_fn: Callable[[], Sequence[np.ndarray]],
                   h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``analytic_grads_fn`` is called once (it may rerun forward/backward);
    ``loss_fn`` is called 2x per parameter element.
    """
    analytic = [np.array(g, copy=True) for g in analytic_grads_fn()]
    worst = 0.0
    for p, a in zip(params, analytic):
        n = central_diff_grad(loss_fn, p, h=h)
        worst = max(worst, max_rel_error(a, n))
    return worst
