import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterrank.corpus import Document, HashedEmbeddings
from clusterrank.encoder import (
    Encoder,
    crosses,
    enumerate_spans,
    head_attention,
    num_kept,
    prune_spans,
)
from clusterrank.numcore import ParamStore, Tensor

from oracles import ffnn_loop
from support import tiny_config


def make_encoder(**over):
    cfg = tiny_config(**over)
    store = ParamStore(np.random.default_rng(0))
    return Encoder(cfg, store, HashedEmbeddings(cfg.word_emb_dim)), store


def doc_of(*sentences):
    return Document("nw/t", [list(s) for s in sentences])


# ---------------------------------------------------------------- enumerate

@pytest.mark.parametrize("T,l,n", [(3, 30, 6), (3, 2, 5), (10, 30, 55), (0, 5, 0)])
def test_enumerate_counts(T, l, n):
    assert len(enumerate_spans(T, l)[0]) == n


def test_enumerate_exhaustive_closed_form():
    for T in range(0, 51):
        for l in range(1, 11):
            starts, ends = enumerate_spans(T, l)
            assert len(starts) == sum(min(l, T - t) for t in range(T))
            pairs = list(zip(starts.tolist(), ends.tolist()))
            assert pairs == sorted(pairs)
            assert all(0 <= s <= e < T and e - s + 1 <= l for s, e in pairs)


# ---------------------------------------------------------------- pruning

def test_num_kept():
    assert num_kept(10, 0.4) == 4
    assert num_kept(2, 0.4) == 1
    assert num_kept(0, 0.4) == 0


def test_prune_keeps_at_most_ratio():
    starts, ends = enumerate_spans(10, 3)
    kept = prune_spans(starts, ends, np.random.default_rng(0).normal(size=len(starts)), 0.4, 10)
    assert len(kept) <= 4


def test_prune_skips_crossing():
    starts, ends = np.array([1, 2]), np.array([3, 4])
    kept = prune_spans(starts, ends, [5.0, 4.0], 1.0, 5)
    assert [(starts[k], ends[k]) for k in kept] == [(1, 3)]


def test_prune_keeps_nested():
    starts, ends = np.array([1, 2]), np.array([4, 3])
    kept = prune_spans(starts, ends, [5.0, 4.0], 1.0, 5)
    assert [(starts[k], ends[k]) for k in kept] == [(1, 4), (2, 3)]


def test_prune_ties_prefer_earlier_then_shorter():
    starts, ends = np.array([2, 0, 0]), np.array([2, 1, 0])
    kept = prune_spans(starts, ends, [1.0, 1.0, 1.0], 0.4, 3)  # keeps one
    assert [(starts[k], ends[k]) for k in kept] == [(0, 0)]


def test_prune_output_in_text_order():
    starts, ends = enumerate_spans(12, 3)
    scores = np.random.default_rng(1).normal(size=len(starts))
    kept = prune_spans(starts, ends, scores, 0.4, 12)
    pairs = [(starts[k], ends[k]) for k in kept]
    assert pairs == sorted(pairs)


def brute_force_prune(starts, ends, scores, limit):
    order = sorted(range(len(starts)), key=lambda k: (-scores[k], starts[k], ends[k]))
    kept = []
    for k in order:
        if len(kept) == limit:
            break
        if any(crosses((starts[k], ends[k]), (starts[j], ends[j])) for j in kept):
            continue
        kept.append(k)
    return sorted(kept, key=lambda k: (starts[k], ends[k]))


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 30), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_prune_matches_brute_force(T, l, seed):
    starts, ends = enumerate_spans(T, l)
    scores = np.random.default_rng(seed).integers(-3, 3, size=len(starts)).astype(float)
    kept = prune_spans(starts, ends, scores, 0.4, T)
    assert kept.tolist() == brute_force_prune(starts.tolist(), ends.tolist(), scores.tolist(), num_kept(T, 0.4))


def test_prune_never_crossing_exhaustive_t50():
    rng = np.random.default_rng(0)
    for T in range(1, 51):
        starts, ends = enumerate_spans(T, 10)
        kept = prune_spans(starts, ends, rng.normal(size=len(starts)), 0.4, T)
        assert len(kept) <= max(1, int(0.4 * T))
        spans = [(starts[k], ends[k]) for k in kept]
        for a, b in itertools.combinations(spans, 2):
            assert not crosses(a, b)


# ---------------------------------------------------------------- head attention

def test_head_width_one():
    vec = np.array([[1.0, -2.0, 3.0]])
    w, h = head_attention(Tensor([0.7]), Tensor(vec))
    np.testing.assert_array_equal(w.data, [1.0])
    np.testing.assert_array_equal(h.data, vec[0])


def test_head_equal_scores():
    w, _ = head_attention(Tensor([0.3, 0.3]), Tensor(np.eye(2)))
    np.testing.assert_allclose(w.data, [0.5, 0.5])


def test_head_three_tokens_by_hand():
    rng = np.random.default_rng(4)
    scores = rng.normal(size=3)
    vecs = rng.normal(size=(3, 4))
    _, h = head_attention(Tensor(scores), Tensor(vecs))
    e = [np.exp(s) for s in scores]
    z = sum(e)
    want = [sum(e[t] / z * vecs[t][d] for t in range(3)) for d in range(4)]
    np.testing.assert_allclose(h.data, want, rtol=1e-12)


@given(st.lists(st.floats(-20, 20), min_size=1, max_size=8), st.floats(-50, 50))
def test_head_weights_sum_one_and_shift_invariant(scores, c):
    vecs = Tensor(np.ones((len(scores), 2)))
    w, _ = head_attention(Tensor(scores), vecs)
    w2, _ = head_attention(Tensor(np.array(scores) + c), vecs)
    assert abs(w.data.sum() - 1.0) < 1e-12
    np.testing.assert_allclose(w.data, w2.data, rtol=1e-9, atol=1e-12)


def test_head_empty_span_is_error():
    with pytest.raises(ValueError):
        head_attention(Tensor(np.zeros(0)), Tensor(np.zeros((0, 2))))


# ---------------------------------------------------------------- encoder

def test_encode_tokens_empty_document():
    enc, _ = make_encoder()
    x, xs = enc.encode_tokens(Document("e", []))
    assert xs.shape == (0, enc.token_dim)


def test_encode_tokens_one_token():
    enc, _ = make_encoder()
    _, xs = enc.encode_tokens(doc_of(["Hi"]))
    assert xs.shape == (1, 2 * 8)


def test_zero_weights_give_zero_token_vectors():
    enc, store = make_encoder()
    for name, p in zip(store.names(), store):
        if name.startswith("encoder/bilstm"):
            p.data[...] = 0.0
    _, xs = enc.encode_tokens(doc_of(["a", "b", "c"], ["d"]))
    assert np.all(xs.data == 0.0)


def test_missing_contextual_vector_is_error():
    from clusterrank.corpus import ContextualEmbeddings, CorpusError

    cfg = tiny_config()
    ctx = ContextualEmbeddings({"other": np.zeros((2, 4, 3))})
    enc = Encoder(cfg, ParamStore(np.random.default_rng(0)), None, ctx)
    with pytest.raises(CorpusError):
        enc.encode_tokens(doc_of(["a", "b"]))


def test_span_repr_layout_and_width_embedding():
    enc, _ = make_encoder()
    doc = doc_of(["the", "big", "dog", "ran"], ["it", "stopped"])
    x, xs = enc.encode_tokens(doc)
    starts = np.array([0, 1, 4, 2])
    ends = np.array([2, 3, 5, 2])
    reprs = enc.span_representations(x, xs, starts, ends).data
    d = enc.token_dim
    np.testing.assert_array_equal(reprs[:, :d], xs.data[starts])
    np.testing.assert_array_equal(reprs[:, d:2 * d], xs.data[ends])
    width_part = reprs[:, 2 * d + enc.input_dim:]
    np.testing.assert_array_equal(width_part[0], width_part[1])  # both width 3
    assert not np.array_equal(width_part[0], width_part[2])
    # width-1 head is that token's raw input
    np.testing.assert_allclose(reprs[3, 2 * d:2 * d + enc.input_dim], x.data[2])


def test_head_matches_direct_summation():
    enc, _ = make_encoder()
    doc = doc_of(["a", "quick", "fox", "jumps"])
    x, xs = enc.encode_tokens(doc)
    reprs = enc.span_representations(x, xs, np.array([1]), np.array([3])).data
    alpha = [float(enc.head_ffnn(Tensor(xs.data[t])).data[0]) for t in (1, 2, 3)]
    e = np.exp(np.array(alpha) - max(alpha))
    a = e / e.sum()
    want = sum(a[k] * x.data[1 + k] for k in range(3))
    d = enc.token_dim
    np.testing.assert_allclose(reprs[0, 2 * d:2 * d + enc.input_dim], want, rtol=1e-10)


def test_head_feature_switch_changes_layout():
    enc, store = make_encoder(head_feature=True)
    assert "encoder/head_offset_emb" in store.names()
    doc = doc_of(["a", "b", "c"])
    x, xs = enc.encode_tokens(doc)
    out = enc.span_representations(x, xs, np.array([0]), np.array([2]))
    assert out.shape == (1, enc.span_dim)


def test_mention_score_zero_weights_and_oracle():
    enc, store = make_encoder()
    reprs = np.random.default_rng(3).normal(size=(2, enc.span_dim))
    got = enc.mention_score(Tensor(reprs)).data
    net = enc.mention_ffnn
    hidden = [(w.data.tolist(), b.data.tolist()) for w, b in net.layers]
    for r in range(2):
        want = ffnn_loop(reprs[r].tolist(), hidden, net.out_w.data.tolist(), net.out_b.data.tolist())[0]
        assert got[r] == pytest.approx(want, rel=1e-10)
    np.testing.assert_array_equal(enc.mention_score(Tensor(reprs)).data, got)
    for name, p in zip(store.names(), store):
        if name.startswith("encoder/mention"):
            p.data[...] = 0.0
    assert np.all(enc.mention_score(Tensor(reprs)).data == 0.0)


def test_encode_kept_scores_are_reused():
    enc, _ = make_encoder()
    doc = doc_of(["John", "saw", "a", "dog"], ["He", "smiled"])
    out = enc.encode(doc)
    assert len(out.kept) == num_kept(6, 0.4)
    np.testing.assert_array_equal(out.scores.data, out.all_scores.data[out.kept])
    for a, b in itertools.combinations(out.kept_spans, 2):
        assert not crosses(a, b)
