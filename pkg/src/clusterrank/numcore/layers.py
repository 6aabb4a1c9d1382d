"""Parameter registry and the network building blocks (FFNN, char CNN, BiLSTM)."""
from __future__ import annotations

from collections import OrderedDict
from typing import Iterator, Optional, Sequence

import numpy as np

from . import ops
from .tensor import Parameter, Tensor


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in = shape[0] if len(shape) > 1 else 1
    fan_out = shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class ParamStore:
    """Ordered name -> :class:`Parameter` map; names are unique."""

    def __init__(self, rng: Optional[np.random.Generator] = None):
        self._params: "OrderedDict[str, Parameter]" = OrderedDict()
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def create(self, name: str, shape: Sequence[int], init: str = "glorot", value: float = 0.0) -> Parameter:
        if name in self._params:
            raise KeyError(f"parameter {name!r} already exists")
        shape = tuple(int(s) for s in shape)
        if init == "glorot":
            data = glorot_uniform(self.rng, shape)
        elif init == "zeros":
            data = np.zeros(shape)
        elif init == "constant":
            data = np.full(shape, float(value))
        elif init == "normal":
            data = self.rng.normal(0.0, 0.02, size=shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        p = Parameter(data, name=name)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, p.data.copy()) for k, p in self._params.items())

    def load_state_dict(self, state: dict) -> None:
        missing = [k for k in self._params if k not in state]
        bad = [
            f"{k}: expected {self._params[k].shape}, got {tuple(np.shape(v))}"
            for k, v in state.items()
            if k in self._params and tuple(np.shape(v)) != self._params[k].shape
        ]
        unexpected = [k for k in state if k not in self._params]
        if missing or bad or unexpected:
            problems = []
            if missing:
                problems.append("missing: " + ", ".join(missing))
            if unexpected:
                problems.append("unexpected: " + ", ".join(unexpected))
            if bad:
                problems.append("shape mismatch: " + "; ".join(bad))
            raise ValueError("checkpoint does not fit the model (" + " | ".join(problems) + ")")
        for k, v in state.items():
            self._params[k].data = np.array(v, dtype=np.float64)

    def num_values(self) -> int:
        return int(sum(p.size for p in self._params.values()))


class FFNN:
    """``depth`` ReLU hidden layers of size ``width`` then a linear output layer."""

    def __init__(self, store: ParamStore, name: str, input_dim: int, depth: int, width: int,
                 output_dim: int = 1, dropout: float = 0.0):
        if depth < 1:
            raise ValueError("FFNN depth must be >= 1")
        self.name = name
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.dropout = dropout
        self.layers: list[tuple[Parameter, Parameter]] = []
        dim = input_dim
        for k in range(depth):
            w = store.create(f"{name}/hidden{k}/w", (dim, width))
            b = store.create(f"{name}/hidden{k}/b", (width,), init="zeros")
            self.layers.append((w, b))
            dim = width
        self.out_w = store.create(f"{name}/out/w", (dim, output_dim))
        self.out_b = store.create(f"{name}/out/b", (output_dim,), init="zeros")

    def __call__(self, x: Tensor, rng: Optional[np.random.Generator] = None) -> Tensor:
        return ffnn_forward(self.layers, (self.out_w, self.out_b), x, self.dropout, rng)


def ffnn_forward(hidden, output, x: Tensor, dropout: float = 0.0,
                 rng: Optional[np.random.Generator] = None) -> Tensor:
    """Apply ReLU hidden layers then the linear output; dropout on hidden activations only."""
    if hidden:
        first = hidden[0][0]
    else:
        first = output[0]
    if x.shape[-1] != first.shape[0]:
        raise ValueError(f"FFNN input shape {x.shape} does not match first layer {first.shape}")
    h = x
    for w, b in hidden:
        h = ops.relu(ops.add(ops.matmul(h, w), b))
        h = ops.dropout(h, dropout, rng)
    return ops.add(ops.matmul(h, output[0]), output[1])


class CharCNN:
    """Character embeddings, one convolution per filter width, ReLU, max-pool over positions."""

    def __init__(self, store: ParamStore, name: str, num_chars: int, char_dim: int,
                 widths: Sequence[int], filters: int):
        self.widths = tuple(widths)
        self.filters = filters
        self.embedding = store.create(f"{name}/char_emb", (num_chars, char_dim), init="normal")
        self.convs = []
        for w in self.widths:
            kernel = store.create(f"{name}/conv{w}/w", (w * char_dim, filters))
            bias = store.create(f"{name}/conv{w}/b", (filters,), init="zeros")
            self.convs.append((w, kernel, bias))

    @property
    def output_dim(self) -> int:
        return self.filters * len(self.widths)

    def __call__(self, char_ids: np.ndarray) -> Tensor:
        """``char_ids`` is ``[n_tokens, L]`` with L >= max filter width (0 is padding)."""
        return char_cnn(self.embedding, self.convs, char_ids)


def char_cnn(embedding: Tensor, convs, char_ids: np.ndarray) -> Tensor:
    char_ids = np.asarray(char_ids, dtype=np.int64)
    max_width = max(w for w, _, _ in convs)
    if char_ids.ndim != 2 or char_ids.shape[1] < max_width:
        raise ValueError(f"char ids must be [n, L>={max_width}], got {char_ids.shape}")
    emb = ops.take(embedding, char_ids)
    pooled = []
    for w, kernel, bias in convs:
        windows = ops.unfold(emb, w)
        n, positions, _ = windows.shape
        flat = ops.reshape(windows, (n * positions, windows.shape[2]))
        act = ops.relu(ops.add(ops.matmul(flat, kernel), bias))
        pooled.append(ops.max(ops.reshape(act, (n, positions, kernel.shape[1])), axis=1))
    return ops.concat(pooled, axis=-1)


class LSTMDirection:
    def __init__(self, store: ParamStore, name: str, input_dim: int, hidden: int):
        self.hidden = hidden
        self.w_ih = store.create(f"{name}/w_ih", (input_dim, 4 * hidden))
        self.w_hh = store.create(f"{name}/w_hh", (hidden, 4 * hidden))
        bias = np.zeros(4 * hidden)
        bias[hidden:2 * hidden] = 1.0  # forget gate
        self.b = store.create(f"{name}/b", (4 * hidden,), init="zeros")
        self.b.data = bias


class BiLSTM:
    """Stacked bidirectional LSTM; each layer feeds ``[forward || backward]`` to the next."""

    def __init__(self, store: ParamStore, name: str, input_dim: int, hidden: int, layers: int,
                 dropout: float = 0.0):
        self.hidden = hidden
        self.dropout = dropout
        self.layers = []
        dim = input_dim
        for k in range(layers):
            fw = LSTMDirection(store, f"{name}/layer{k}/fw", dim, hidden)
            bw = LSTMDirection(store, f"{name}/layer{k}/bw", dim, hidden)
            self.layers.append((fw, bw))
            dim = 2 * hidden

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden

    def __call__(self, x: Tensor, lengths: Sequence[int],
                 rng: Optional[np.random.Generator] = None) -> Tensor:
        return bilstm(self.layers, x, lengths, self.dropout, rng)


def bilstm(layers, x: Tensor, lengths: Sequence[int], dropout: float = 0.0,
           rng: Optional[np.random.Generator] = None) -> Tensor:
    """Run each sentence (segment of ``lengths``) independently through all layers."""
    h = x
    for fw, bw in layers:
        outs = []
        for direction, reverse in ((fw, False), (bw, True)):
            proj = ops.add(ops.matmul(h, direction.w_ih), direction.b)
            outs.append(ops.lstm_recurrence(proj, direction.w_hh, lengths, reverse=reverse))
        h = ops.dropout(ops.concat(outs, axis=-1), dropout, rng)
    return h
