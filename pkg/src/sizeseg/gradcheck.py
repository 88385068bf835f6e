"""Central-difference gradient verification for the loss operations."""

from __future__ import annotations

import numpy as np


def central_difference(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Numerical gradient of scalar fn at x, one central difference per entry."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + h
        hi = fn(x)
        xf[i] = orig - h
        lo = fn(x)
        xf[i] = orig
        flat[i] = (hi - lo) / (2.0 * h)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-6) -> float:
    """max |a - n| / max(|a|, |n|, floor) over all entries.

    The floor keeps entries that are numerically zero on both sides from
    producing spurious 0/0 blowups.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


def check_logit_gradient(loss_fn, logits: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between loss_fn's analytic gradient and central
    differences of its value, both taken w.r.t. the logits.

    loss_fn maps a logit array to (value, grad-wrt-logits).
    """
    _, analytic = loss_fn(logits)
    numeric = central_difference(lambda z: loss_fn(z)[0], logits.copy(), h=h)
    return max_relative_error(analytic, numeric)
