"""Central finite-difference checks for the autodiff tape."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward


def numeric_gradient(fn: Callable[[], Tensor], leaf: Tensor, h: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(leaf.data)
    flat = leaf.data.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        up = float(fn().data)
        flat[k] = orig - h
        down = float(fn().data)
        flat[k] = orig
        gflat[k] = (up - down) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Max over entries of ``|a - n| / max(|a|, |n|, floor)``."""
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(fn: Callable[[], Tensor], leaves: Sequence[Tensor], h: float = 1e-5) -> dict:
    """Compare tape gradients of scalar ``fn()`` with central differences.

    Returns ``{leaf name or index: max relative error}``.
    """
    for leaf in leaves:
        leaf.grad = None
    loss = fn()
    backward(loss)
    errors = {}
    for k, leaf in enumerate(leaves):
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        analytic = analytic.copy()
        numeric = numeric_gradient(fn, leaf, h)
        errors[leaf.name or k] = relative_error(analytic, numeric)
        leaf.grad = None
    return errors
