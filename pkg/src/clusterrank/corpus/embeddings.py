"""Word-level embedding sources: static text tables, hashed vectors, contextual sidecars."""
from __future__ import annotations

import hashlib
from typing import Optional, Sequence

import numpy as np

from .document import CorpusError


class EmbeddingTable:
    """Static token -> vector map. Unknown tokens map to the zero vector."""

    kind = "static"

    def __init__(self, vectors: dict[str, np.ndarray], dim: int, lowercase_fallback: bool = True):
        self.vectors = vectors
        self.dim = dim
        self.lowercase_fallback = lowercase_fallback

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def vector(self, token: str) -> np.ndarray:
        v = self.vectors.get(token)
        if v is None and self.lowercase_fallback:
            v = self.vectors.get(token.lower())
        return v if v is not None else np.zeros(self.dim)

    def lookup(self, tokens: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(tokens), self.dim))
        for k, tok in enumerate(tokens):
            out[k] = self.vector(tok)
        return out


class HashedEmbeddings(EmbeddingTable):
    """Deterministic unit-norm pseudo-random vector per token string."""

    kind = "hashed"

    def __init__(self, dim: int, seed: int = 0):
        super().__init__({}, dim, lowercase_fallback=False)
        self.seed = seed

    def vector(self, token: str) -> np.ndarray:
        v = self.vectors.get(token)
        if v is None:
            digest = hashlib.blake2b(f"{self.seed}\x1f{token}".encode("utf-8"), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            v = rng.standard_normal(self.dim)
            v /= np.linalg.norm(v)
            self.vectors[token] = v
        return v

    def __contains__(self, token: str) -> bool:
        return True


class ContextualEmbeddings:
    """Precomputed per-token layer outputs, one ``[T, layers, d]`` array per doc_key (npz)."""

    kind = "contextual"

    def __init__(self, arrays: dict[str, np.ndarray], num_layers: int = 4, reducer: str = "concat"):
        if reducer not in ("concat", "mean"):
            raise ValueError(f"unknown layer reducer {reducer!r}")
        self.arrays = arrays
        self.num_layers = num_layers
        self.reducer = reducer
        dims = {a.shape[-1] for a in arrays.values()}
        if len(dims) > 1:
            raise CorpusError(f"contextual vectors have inconsistent dimensions {sorted(dims)}")
        self.layer_dim = dims.pop() if dims else 0

    @property
    def dim(self) -> int:
        return self.layer_dim * (self.num_layers if self.reducer == "concat" else 1)

    def lookup(self, doc_key: str, num_tokens: int) -> np.ndarray:
        base = doc_key.split("@", 1)[0]
        arr = self.arrays.get(doc_key)
        if arr is None:
            arr = self.arrays.get(base)
        if arr is None:
            raise CorpusError(f"no contextual vectors for document {doc_key!r}")
        if arr.shape[0] != num_tokens:
            raise CorpusError(
                f"contextual vectors for {doc_key!r} cover {arr.shape[0]} tokens, document has {num_tokens}"
            )
        return reduce_layers(arr, self.num_layers, self.reducer)


def reduce_layers(arr: np.ndarray, num_layers: int = 4, reducer: str = "concat") -> np.ndarray:
    """Combine the last ``num_layers`` of a ``[T, L, d]`` array."""
    if arr.ndim == 2:
        arr = arr[:, None, :]
    if arr.shape[1] < num_layers:
        raise CorpusError(f"need {num_layers} layers, got {arr.shape[1]}")
    top = arr[:, -num_layers:, :]
    if reducer == "mean":
        return top.mean(axis=1)
    return top.reshape(arr.shape[0], -1)


def read_static_table(path: str) -> EmbeddingTable:
    vectors: dict[str, np.ndarray] = {}
    dim: Optional[int] = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue  # word2vec-style header
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise CorpusError(
                    f"{path}, line {lineno}: vector for {token!r} has {len(values)} values, expected {dim}"
                )
            try:
                vectors[token] = np.array([float(v) for v in values])
            except ValueError:
                raise CorpusError(f"{path}, line {lineno}: non-numeric value") from None
    return EmbeddingTable(vectors, dim or 0)


def load_embeddings(path: Optional[str], kind: str = "static", dim: Optional[int] = None,
                    seed: int = 0, reducer: str = "concat", num_layers: int = 4):
    """Load an embedding source.

    ``static``: whitespace text, one ``token v1 .. vd`` per line.
    ``contextual``: ``.npz`` with one ``[T, layers, d]`` array per doc_key.
    ``hashed``: no file; ``dim`` required.
    """
    if kind == "static":
        return read_static_table(path)
    if kind == "hashed":
        if not dim:
            raise ValueError("hashed embeddings need a dimension")
        return HashedEmbeddings(int(dim), seed=seed)
    if kind == "contextual":
        with np.load(path) as data:
            arrays = {k: np.asarray(data[k], dtype=np.float64) for k in data.files}
        return ContextualEmbeddings(arrays, num_layers=num_layers, reducer=reducer)
    raise ValueError(f"unknown embedding kind {kind!r}")
