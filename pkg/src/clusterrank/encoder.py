"""Document -> scored, pruned span candidates.

Token inputs (word vectors, optional contextual vectors, char CNN) go through
a per-sentence BiLSTM. Each span is represented by its boundary states, an
attention-pooled head vector and a width embedding; a feedforward scorer
ranks spans and the top ``ratio * T`` non-crossing ones are kept.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import TrainConfig
from .corpus import CorpusError, Document
from .numcore import FFNN, BiLSTM, CharCNN, ParamStore, Tensor, ops
from .numcore import kernels


@dataclass(frozen=True)
class SpanCandidate:
    start: int
    end: int

    @property
    def width(self) -> int:
        return self.end - self.start + 1


def enumerate_spans(num_tokens: int, max_width: int) -> tuple[np.ndarray, np.ndarray]:
    """All spans of width <= ``max_width`` in (start, end) order."""
    if max_width < 1:
        raise ValueError("max_width must be >= 1")
    starts, ends = [], []
    for s in range(num_tokens):
        for e in range(s, min(num_tokens, s + max_width)):
            starts.append(s)
            ends.append(e)
    return np.asarray(starts, dtype=np.int64), np.asarray(ends, dtype=np.int64)


def num_kept(num_tokens: int, ratio: float) -> int:
    if num_tokens < 1:
        return 0
    return max(1, int(math.floor(ratio * num_tokens)))


def prune_spans(starts, ends, scores, ratio: float, num_tokens: int) -> np.ndarray:
    """Indices of the kept spans, in text order.

    Greedy by descending score (ties: earlier start, then shorter); a span is
    skipped when it crosses an already kept span. Nested spans are allowed.
    """
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if starts.size == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((ends, starts, -scores))
    kept = kernels.greedy_prune(starts, ends, order, num_kept(num_tokens, ratio))
    return kept[np.lexsort((ends[kept], starts[kept]))]


def crosses(a: tuple[int, int], b: tuple[int, int]) -> bool:
    (si, ei), (sj, ej) = a, b
    return (si < sj <= ei < ej) or (sj < si <= ej < ei)


def head_attention(token_scores: Tensor, vectors: Tensor) -> tuple[Tensor, Tensor]:
    """Softmax over one span's token scores and the weighted sum of its vectors."""
    if token_scores.shape[0] == 0:
        raise ValueError("head attention over an empty span")
    weights = ops.softmax(token_scores)
    return weights, ops.matmul(weights, vectors)


def char_ids(words: list[str], num_buckets: int, min_len: int) -> np.ndarray:
    width = max([min_len] + [len(w) for w in words])
    ids = np.zeros((len(words), width), dtype=np.int64)
    for k, w in enumerate(words):
        if not w:
            raise CorpusError("token with no characters")
        ids[k, :len(w)] = [ord(ch) % (num_buckets - 1) + 1 for ch in w]
    return ids


@dataclass
class EncodedDoc:
    doc: Document
    starts: np.ndarray          # all candidate spans
    ends: np.ndarray
    all_scores: Tensor          # s_m for every candidate
    kept: np.ndarray            # indices into the candidate arrays, text order
    reprs: Tensor               # N* of kept spans, [K, D]
    scores: Tensor              # s_m of kept spans, [K]

    @property
    def kept_spans(self) -> list[tuple[int, int]]:
        return [(int(self.starts[k]), int(self.ends[k])) for k in self.kept]


class Encoder:
    def __init__(self, config: TrainConfig, store: ParamStore, word_embeddings=None,
                 contextual=None):
        self.config = config
        self.word_embeddings = word_embeddings
        self.contextual = contextual
        c = config
        input_dim = 0
        if word_embeddings is not None:
            input_dim += word_embeddings.dim
        if contextual is not None:
            input_dim += contextual.dim
        self.char_cnn = None
        if c.use_char_cnn:
            self.char_cnn = CharCNN(store, "encoder/char", c.num_char_buckets, c.char_emb_size,
                                    c.cnn_widths, c.cnn_filters)
            input_dim += self.char_cnn.output_dim
        if input_dim == 0:
            raise ValueError("encoder has no token inputs")
        self.input_dim = input_dim
        self.lstm = BiLSTM(store, "encoder/bilstm", input_dim, c.bilstm_size, c.bilstm_layers,
                           dropout=c.bilstm_dropout)
        self.token_dim = self.lstm.output_dim
        head_in = self.token_dim
        self.head_offset_emb = None
        if c.head_feature:
            self.head_offset_emb = store.create("encoder/head_offset_emb", (c.max_span_width, c.feature_size))
            head_in += c.feature_size
        self.head_ffnn = FFNN(store, "encoder/head", head_in, c.ffnn_layers, c.ffnn_size, 1, c.ffnn_dropout)
        self.width_emb = None
        if c.use_width_emb:
            self.width_emb = store.create("encoder/width_emb", (c.max_span_width, c.feature_size))
        self.span_dim = 2 * self.token_dim + self.input_dim + (c.feature_size if c.use_width_emb else 0)
        self.mention_ffnn = FFNN(store, "encoder/mention", self.span_dim, c.ffnn_layers, c.ffnn_size, 1,
                                 c.ffnn_dropout)
        self._static_cache: dict = {}

    # -- token level -------------------------------------------------------
    def _static_inputs(self, doc: Document):
        key = (doc.doc_key, doc.num_tokens)
        hit = self._static_cache.get(key)
        if hit is not None:
            return hit
        words = doc.words
        parts = []
        if self.word_embeddings is not None:
            parts.append(self.word_embeddings.lookup(words))
        if self.contextual is not None:
            parts.append(self.contextual.lookup(doc.doc_key, len(words)))
        dense = np.concatenate(parts, axis=1) if parts else None
        ids = None
        if self.char_cnn is not None:
            ids = char_ids(words, self.config.num_char_buckets, max(self.config.cnn_widths))
        if len(self._static_cache) > 4096:
            self._static_cache.clear()
        self._static_cache[key] = (dense, ids)
        return dense, ids

    def token_inputs(self, doc: Document, rng: Optional[np.random.Generator] = None) -> Tensor:
        """Concatenated word/contextual/char vectors ``x_t``, ``[T, input_dim]``."""
        dense, ids = self._static_inputs(doc)
        parts = []
        if dense is not None:
            parts.append(Tensor(dense))
        if ids is not None:
            parts.append(self.char_cnn(ids))
        x = ops.concat(parts, axis=-1) if len(parts) > 1 else parts[0]
        return ops.dropout(x, self.config.embedding_dropout, rng)

    def encode_tokens(self, doc: Document, rng: Optional[np.random.Generator] = None):
        """Returns ``(x, x_star)``: raw inputs and BiLSTM outputs per token."""
        if doc.num_tokens == 0:
            return Tensor(np.zeros((0, self.input_dim))), Tensor(np.zeros((0, self.token_dim)))
        x = self.token_inputs(doc, rng)
        lengths = [n for n in doc.sentence_lengths if n > 0]
        return x, self.lstm(x, lengths, rng)

    # -- span level --------------------------------------------------------
    def span_representations(self, x: Tensor, x_star: Tensor, starts: np.ndarray, ends: np.ndarray,
                             rng: Optional[np.random.Generator] = None) -> Tensor:
        """``N* = [x*_start, x*_end, head, width_emb]`` for each span."""
        width = ends - starts
        max_w = int(width.max()) + 1
        offsets = np.arange(max_w)
        idx = starts[:, None] + offsets[None, :]
        valid = offsets[None, :] <= width[:, None]
        idx = np.where(valid, idx, starts[:, None])
        mask = np.where(valid, 0.0, -np.inf)
        if self.head_offset_emb is None:
            alpha = ops.reshape(self.head_ffnn(x_star, rng), (x_star.shape[0],))
            span_alpha = ops.take(alpha, idx)
        else:
            tok = ops.take(x_star, idx)
            off = ops.take(self.head_offset_emb, np.broadcast_to(offsets, idx.shape))
            feats = ops.concat([tok, off], axis=-1)
            flat = ops.reshape(feats, (idx.size, feats.shape[-1]))
            span_alpha = ops.reshape(self.head_ffnn(flat, rng), idx.shape)
        weights = ops.softmax(ops.add(span_alpha, mask), axis=1)
        head_vecs = ops.take(x, idx)
        head = ops.sum(ops.mul(ops.reshape(weights, weights.shape + (1,)), head_vecs), axis=1)
        parts = [ops.take(x_star, starts), ops.take(x_star, ends), head]
        if self.width_emb is not None:
            parts.append(ops.take(self.width_emb, width))
        return ops.concat(parts, axis=-1)

    def mention_score(self, reprs: Tensor, rng: Optional[np.random.Generator] = None) -> Tensor:
        return ops.reshape(self.mention_ffnn(reprs, rng), (reprs.shape[0],))

    def encode(self, doc: Document, rng: Optional[np.random.Generator] = None) -> EncodedDoc:
        c = self.config
        n = doc.num_tokens
        starts, ends = enumerate_spans(n, c.max_span_width)
        if n == 0:
            empty = Tensor(np.zeros(0))
            return EncodedDoc(doc, starts, ends, empty, np.zeros(0, dtype=np.int64),
                              Tensor(np.zeros((0, self.span_dim))), empty)
        x, x_star = self.encode_tokens(doc, rng)
        reprs = self.span_representations(x, x_star, starts, ends, rng)
        scores = self.mention_score(reprs, rng)
        kept = prune_spans(starts, ends, scores.data, c.mention_ratio, n)
        return EncodedDoc(doc, starts, ends, scores, kept, ops.take(reprs, kept), ops.take(scores, kept))
