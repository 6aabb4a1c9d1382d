import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterrank.corpus import FINE_NR_TYPES, NRType
from clusterrank.decoder import (
    ClusterScorerNet,
    ClusterState,
    ModelScorer,
    TableScorer,
    cluster_rank,
    epsilon_classes,
    latest,
)
from clusterrank.numcore import ParamStore, Tensor

from oracles import cluster_ranking_interpreter, ffnn_loop
from support import random_table, tiny_config


def run(eps, pair, fine=False, **kw):
    return cluster_rank(len(eps), TableScorer(eps, pair, fine), **kw)


def nr_columns(res, fine):
    types = FINE_NR_TYPES if fine else (NRType.NR,)
    return sorted((m, types.index(t)) for m, t in res.nonreferring)


# ---------------------------------------------------------------- epsilon / pair nets

def make_net(fine=False, span_dim=6, **over):
    cfg = tiny_config(nr_mode="fine" if fine else "hybrid", **over)
    store = ParamStore(np.random.default_rng(1))
    return ClusterScorerNet(store, span_dim, cfg, 2), store


def zero(store, prefix):
    for name, p in zip(store.names(), store):
        if name.startswith(prefix):
            p.data[...] = 0.0


def test_epsilon_scores_formula():
    net, store = make_net()
    zero(store, "decoder/epsilon")
    out = net.epsilon_scores(Tensor(np.ones((1, 6))), Tensor([2.0])).data
    np.testing.assert_array_equal(out, [[0.0, 2.0, 2.0]])


def test_fine_mode_has_seven_columns():
    net, store = make_net(fine=True)
    zero(store, "decoder/epsilon")
    out = net.epsilon_scores(Tensor(np.ones((1, 6))), Tensor([1.5])).data
    assert out.shape == (1, 7)
    assert [str(c) for c in epsilon_classes(True)] == [
        "NO", "NR:Expletive", "NR:Predicate", "NR:Quantifier", "NR:Coordination", "NR:Idiom", "DN"]
    assert out[0, 1:6].max() == 1.5


def _pair_inputs(net, same=0):
    rng = np.random.default_rng(2)
    reprs = Tensor(rng.normal(size=(3, 6)))
    s_m = Tensor(rng.normal(size=3))
    c_reprs = Tensor(rng.normal(size=(1, 6)))
    c_scores = Tensor(rng.normal(size=1))
    return reprs, s_m, c_reprs, c_scores


def test_pair_score_zero_weights():
    net, store = make_net()
    zero(store, "decoder/pair")
    reprs, s_m, c_reprs, c_scores = _pair_inputs(net)
    out = net.pair_scores(reprs, s_m, c_reprs, c_scores, [2], [0], [1], [1], [1], 1).data
    assert out[0] == pytest.approx(s_m.data[2] + c_scores.data[0])


def test_pair_score_matches_loop_oracle():
    net, _ = make_net()
    reprs, s_m, c_reprs, c_scores = _pair_inputs(net)
    got = net.pair_scores(reprs, s_m, c_reprs, c_scores, [2], [0], [1], [3], [2], 1).data[0]
    n = reprs.data[2]
    c = c_reprs.data[0]
    feats = list(n) + list(c) + [a * b for a, b in zip(n, c)]
    feats += list(net.genre_emb.data[1]) + list(net.speaker_emb.data[1])
    feats += list(net.distance_emb.data[3]) + list(net.size_emb.data[1])
    hidden = [(w.data.tolist(), b.data.tolist()) for w, b in net.pair_ffnn.layers]
    mc = ffnn_loop(feats, hidden, net.pair_ffnn.out_w.data.tolist(), net.pair_ffnn.out_b.data.tolist())[0]
    assert got == pytest.approx(s_m.data[2] + c_scores.data[0] + mc, rel=1e-10)


def test_same_speaker_flag_changes_one_feature_block():
    net, store = make_net()
    reprs, s_m, c_reprs, c_scores = _pair_inputs(net)
    a = net.pair_scores(reprs, s_m, c_reprs, c_scores, [2], [0], [0], [1], [1], 1).data[0]
    b = net.pair_scores(reprs, s_m, c_reprs, c_scores, [2], [0], [1], [1], [1], 1).data[0]
    net.speaker_emb.data[1] = net.speaker_emb.data[0]
    c = net.pair_scores(reprs, s_m, c_reprs, c_scores, [2], [0], [1], [1], [1], 1).data[0]
    assert a != b and a == c


def test_cluster_state_attention_identities():
    net, _ = make_net()
    rng = np.random.default_rng(5)
    reprs = Tensor(rng.normal(size=(5, 6)))
    s_m = Tensor(rng.normal(size=5))
    scorer = ModelScorer(net, reprs, s_m, ["a"] * 5, 1)
    st_ = ClusterState(0, (0, 2, 4), 4, 0, 0)
    scorer.on_create(st_)
    assert st_.weights.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(st_.repr.data, st_.weights @ reprs.data[[0, 2, 4]], atol=1e-9)
    assert float(st_.score.data) == pytest.approx(st_.weights @ s_m.data[[0, 2, 4]], abs=1e-9)
    beta = [float(net.salience(Tensor(reprs.data[[m]]), [p]).data[0]) for p, m in enumerate((0, 2, 4), 1)]
    np.testing.assert_allclose(st_.salience, beta, rtol=1e-10)


# ---------------------------------------------------------------- resolve

def test_zero_mentions():
    res = cluster_rank(0, TableScorer(np.zeros((0, 3)), lambda i, m: 0.0))
    assert res.clusters == [] and res.nonreferring == []


def test_one_mention_dn():
    res = run(np.array([[0.0, 0.0, 1.0]]), lambda i, m: 0.0)
    assert res.clusters == [[0]] and res.nonreferring == []


def test_hand_trace_three_mentions():
    # m0: DN. m1: cluster {0} scores 3 > DN 1 -> joins. m2: versions {0} (2.5), {0,1} (1.0); DN 2
    eps = np.array([[0.0, -1.0, 1.0], [0.0, -1.0, 1.0], [0.0, -1.0, 2.0]])
    table = {(1, (0,)): 3.0, (2, (0,)): 2.5, (2, (0, 1)): 1.0}
    pair = lambda i, m: table[(i, m)]  # noqa: E731
    with_history = run(eps, pair, history=True)
    assert with_history.clusters == [[0, 1, 2]]
    assert with_history.decisions[2].target == 0  # historical version, attached to the live entity
    without = run(eps, pair, history=False)
    assert without.clusters == [[0, 1], [2]]


def test_hand_trace_nr_and_no():
    eps = np.array([[5.0, 0.0, 1.0], [0.0, 4.0, 1.0], [0.0, 0.0, 1.0]])
    res = run(eps, lambda i, m: 0.0, mode="prefilter")
    assert res.clusters == [[2]]
    assert res.nonreferring == [(1, NRType.NR)]


def test_tie_prefers_dn_then_recent_cluster():
    eps = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [-9.0, -9.0, 0.0]])
    res = run(eps, lambda i, m: 0.0 if i == 2 else -5.0)
    assert res.clusters == [[0], [1], [2]]  # DN wins the tie
    res = run(eps, lambda i, m: (1.0 if i == 2 else -5.0))
    assert res.clusters == [[0], [1, 2]]  # most recent cluster wins


def test_postfilter_singleton_becomes_nr():
    # NR is the arg-max but below threshold; DN is next best; nothing joins later
    eps = np.array([[0.0, 1.0, 0.9], [0.0, 0.0, 3.0]])
    res = run(eps, lambda i, m: -5.0, mode="hybrid", threshold=0.9)
    assert res.nonreferring == [(0, NRType.NR)]
    assert res.clusters == [[1]]
    assert res.decisions[0].postfilter


def test_postfilter_span_joined_later_stays_in_cluster():
    eps = np.array([[0.0, 1.0, 0.9], [0.0, 0.0, -1.0]])
    res = run(eps, lambda i, m: 5.0, mode="hybrid", threshold=0.9)
    assert res.nonreferring == [] and res.clusters == [[0, 1]]


def test_max_clusters_is_a_window():
    eps = np.array([[0.0, -9.0, 1.0]] * 3 + [[0.0, -9.0, -9.0]])
    pair = lambda i, m: (-9.0 if i < 3 else (5.0 if m == (0,) else 0.0))  # noqa: E731
    res = run(eps, pair, max_clusters=2)
    assert res.clusters == [[0], [1], [2, 3]]
    res = run(eps, pair, max_clusters=3)
    assert res.clusters == [[0, 3], [1], [2]]


def test_latest_chain_and_errors():
    states = {k: ClusterState(k, (k,), k, k + 1 if k < 2 else k, 0) for k in range(3)}
    assert latest(2, states) == 2
    assert latest(0, states) == 2
    assert states[0].latest == 2  # compressed
    with pytest.raises(KeyError):
        latest(9, states)


def test_k_attachments_resolve_to_one_live_state():
    n = 6
    eps = np.array([[0.0, -9.0, 1.0]] + [[0.0, -9.0, -9.0]] * (n - 1))
    scorer = TableScorer(eps, lambda i, m: float(len(m)))
    res = cluster_rank(n, scorer, history=True)
    assert res.clusters == [list(range(n))]


# ---------------------------------------------------------------- properties

def _compare(seed, mode, history, fine, threshold=0.5, max_clusters=250, tie_prone=True):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(0, 7))
    eps, pair = random_table(rng, n, fine, tie_prone)
    res = run(eps, pair, fine=fine, mode=mode, threshold=threshold, history=history,
              max_clusters=max_clusters)
    want_c, want_nr = cluster_ranking_interpreter(eps.tolist(), pair, mode, threshold, history, max_clusters)
    assert sorted(res.clusters) == want_c
    assert nr_columns(res, fine) == want_nr


@pytest.mark.parametrize("mode", ["prefilter", "hybrid", "fine"])
@pytest.mark.parametrize("history", [True, False])
def test_matches_interpreter(mode, history):
    for seed in range(40):
        _compare(seed, mode, history, mode == "fine", tie_prone=seed % 2 == 0)


def test_matches_interpreter_small_window():
    for seed in range(40):
        _compare(seed, "hybrid", True, False, max_clusters=2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans(), st.booleans())
def test_hybrid_zero_equals_prefilter(seed, history, fine):
    rng = np.random.default_rng(seed)
    eps, pair = random_table(rng, int(rng.integers(0, 7)), fine)
    a = run(eps, pair, fine=fine, mode="prefilter", history=history)
    b = run(eps, pair, fine=fine, mode="fine" if fine else "hybrid", threshold=0.0, history=history)
    assert a.clusters == b.clusters and a.nonreferring == b.nonreferring


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_hybrid_above_one_never_prefilters(seed, history):
    rng = np.random.default_rng(seed)
    eps, pair = random_table(rng, int(rng.integers(0, 7)), False)
    res = run(eps, pair, mode="hybrid", threshold=2.0, history=history)
    nr_decisions = [d for d in res.decisions if d.label.startswith("NR")]
    assert nr_decisions == []
    for m, _ in res.nonreferring:
        assert res.decisions[m].postfilter


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_historical_choice_targets_live_entity(seed):
    rng = np.random.default_rng(seed)
    eps, pair = random_table(rng, 6, False)
    res = run(eps, pair, history=True)
    owner = {m: k for k, c in enumerate(res.clusters) for m in c}
    attached = [d for d in res.decisions if d.label == "cluster"]
    for d in attached:
        # every version of an entity starts with the entity's first mention (state ids follow
        # creation order, so the entity's founding mention is the one whose DN made it)
        cluster = res.clusters[owner[d.mention]]
        assert cluster[0] < d.mention
        founder = [e.mention for e in res.decisions if e.label == "DN"]
        assert cluster[0] in founder


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["prefilter", "hybrid"]))
def test_output_is_a_partition_without_no_spans(seed, mode):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(0, 7))
    eps, pair = random_table(rng, n, False)
    res = run(eps, pair, mode=mode)
    in_clusters = [m for c in res.clusters for m in c]
    nr = [m for m, _ in res.nonreferring]
    assert len(in_clusters) == len(set(in_clusters))
    assert not set(in_clusters) & set(nr)
    no = {d.mention for d in res.decisions if d.label == "NO"}
    assert not no & (set(in_clusters) | set(nr))
    assert set(in_clusters) | set(nr) | no == set(range(n))
    again = run(eps, pair, mode=mode)
    assert again.clusters == res.clusters and again.nonreferring == res.nonreferring
