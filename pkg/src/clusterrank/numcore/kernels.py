"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``CLUSTERRANK_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("CLUSTERRANK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels_c as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "compiled"


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def lstm_forward(xproj, w_hh, lengths, reverse=False, impl=None):
    impl = impl or _impl
    return impl.lstm_forward(_f64(xproj), _f64(w_hh), _i64(lengths), bool(reverse))


def lstm_backward(dh, w_hh, h, c, gates, lengths, reverse=False, impl=None):
    impl = impl or _impl
    return impl.lstm_backward(
        _f64(dh), _f64(w_hh), _f64(h), _f64(c), _f64(gates), _i64(lengths), bool(reverse)
    )


def greedy_prune(starts, ends, order, max_keep, impl=None):
    impl = impl or _impl
    return impl.greedy_prune(_i64(starts), _i64(ends), _i64(order), int(max_keep))


def available_backends() -> dict:
    """Name -> implementation module for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels_c
    except ImportError:
        pass
    else:
        found["compiled"] = _kernels_c
    return found
