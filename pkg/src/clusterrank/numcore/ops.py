"""Differentiable operations on :class:`Tensor`.

Each function computes its forward value with numpy and attaches a closure
that maps the output gradient onto its inputs.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import kernels
from .tensor import Tensor, as_tensor, make_node


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return make_node(a.data + b.data, (a, b), _backward, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return make_node(a.data - b.data, (a, b), _backward, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return make_node(a.data * b.data, (a, b), _backward, "mul")


def matmul(a, b) -> Tensor:
    """``a @ b`` for 1-D or 2-D left operand and a 2-D right operand."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def _backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            if a.ndim == 1:
                b._accumulate(np.outer(a.data, g))
            else:
                b._accumulate(a.data.T @ g)

    return make_node(a.data @ b.data, (a, b), _backward, "matmul")


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)

    def _backward(g):
        x._accumulate(g * (x.data > 0.0))

    return make_node(out, (x,), _backward, "relu")


def sigmoid(x: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-x.data))

    def _backward(g):
        x._accumulate(g * out * (1.0 - out))

    return make_node(out, (x,), _backward, "sigmoid")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def _backward(g):
        x._accumulate(g * (1.0 - out * out))

    return make_node(out, (x,), _backward, "tanh")


def sum(x: Tensor, axis: Optional[int] = None) -> Tensor:  # noqa: A001
    out = x.data.sum(axis=axis)

    def _backward(g):
        if axis is None:
            x._accumulate(np.broadcast_to(g, x.shape))
        else:
            x._accumulate(np.broadcast_to(np.expand_dims(g, axis), x.shape))

    return make_node(np.asarray(out), (x,), _backward, "sum")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    out = x.data.reshape(shape)

    def _backward(g):
        x._accumulate(g.reshape(x.shape))

    return make_node(out, (x,), _backward, "reshape")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    ax = axis % out.ndim
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def _backward(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[ax] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return make_node(out, tensors, _backward, "concat")


def stack(tensors: Sequence[Tensor]) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors])

    def _backward(g):
        for k, t in enumerate(tensors):
            if t.requires_grad:
                t._accumulate(g[k])

    return make_node(out, tensors, _backward, "stack")


def index(x: Tensor, idx) -> Tensor:
    """Basic or advanced ``x[idx]``; repeated indices accumulate."""
    out = x.data[idx]

    def _backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        x._accumulate(full)

    return make_node(np.array(out), (x,), _backward, "index")


def take(x: Tensor, indices) -> Tensor:
    """Gather rows along axis 0; ``indices`` may be any integer array shape."""
    indices = np.asarray(indices, dtype=np.int64)
    out = x.data[indices]

    def _backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, indices, g)
        x._accumulate(full)

    return make_node(out, (x,), _backward, "take")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax. ``-inf`` entries get exactly zero mass."""
    if x.data.size == 0:
        raise ValueError("softmax of an empty tensor")
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def _backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        x._accumulate(out * (g - inner))

    return make_node(out, (x,), _backward, "softmax")


def logsumexp(x: Tensor, axis: int = -1) -> Tensor:
    m = np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(x.data - m)
    s = e.sum(axis=axis, keepdims=True)
    out = (np.log(s) + m).squeeze(axis)

    def _backward(g):
        x._accumulate(np.expand_dims(g, axis) * (e / s))

    return make_node(out, (x,), _backward, "logsumexp")


def max(x: Tensor, axis: int) -> Tensor:  # noqa: A001
    """Max along ``axis``; the gradient goes to the first arg-max."""
    arg = np.argmax(x.data, axis=axis)
    out = np.take_along_axis(x.data, np.expand_dims(arg, axis), axis=axis).squeeze(axis)

    def _backward(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, np.expand_dims(arg, axis), np.expand_dims(g, axis), axis=axis)
        x._accumulate(full)

    return make_node(out, (x,), _backward, "max")


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout. Identity when ``rng`` is None or ``rate`` is 0."""
    if rng is None or rate <= 0.0:
        return x
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep) / keep
    return mul(x, mask)


def unfold(x: Tensor, width: int) -> Tensor:
    """Sliding windows over axis 1: ``[n, L, c] -> [n, L - width + 1, width * c]``."""
    n, length, c = x.shape
    if length < width:
        raise ValueError(f"sequence length {length} shorter than window {width}")
    positions = length - width + 1
    cols = np.arange(positions)[:, None] + np.arange(width)[None, :]
    out = x.data[:, cols, :].reshape(n, positions, width * c)

    def _backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, (slice(None), cols), g.reshape(n, positions, width, c))
        x._accumulate(full)

    return make_node(out, (x,), _backward, "unfold")


def lstm_recurrence(
    xproj: Tensor,
    w_hh: Tensor,
    lengths: Sequence[int],
    reverse: bool = False,
) -> Tensor:
    """Run LSTM cells over consecutive segments of ``xproj``.

    ``xproj`` is ``[T, 4H]`` (input projection plus bias, gate order i, f, o, g);
    ``w_hh`` is ``[H, 4H]``. State resets at each segment boundary given by
    ``lengths``. Returns hidden states ``[T, H]``.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    if int(lengths.sum()) != xproj.shape[0]:
        raise ValueError(f"segment lengths sum to {lengths.sum()}, expected {xproj.shape[0]}")
    h, c, gates = kernels.lstm_forward(xproj.data, w_hh.data, lengths, reverse)

    def _backward(g):
        dx, dw = kernels.lstm_backward(
            np.ascontiguousarray(g), w_hh.data, h, c, gates, lengths, reverse
        )
        if xproj.requires_grad:
            xproj._accumulate(dx)
        if w_hh.requires_grad:
            w_hh._accumulate(dw)

    return make_node(h, (xproj, w_hh), _backward, "lstm")
