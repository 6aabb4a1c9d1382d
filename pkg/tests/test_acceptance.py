"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines
appear in the output whether or not ``-s`` is given.
"""
import itertools
import time

import numpy as np
import pytest

from clusterrank.corpus import FINE_NR_TYPES, NRType
from clusterrank.decoder import ClusterScorerNet, TableScorer, cluster_rank
from clusterrank.encoder import Encoder, crosses, enumerate_spans, num_kept, prune_spans
from clusterrank.corpus import HashedEmbeddings
from clusterrank.metrics import b_cubed, ceaf_phi4, evaluate, muc
from clusterrank.numcore import BiLSTM, CharCNN, FFNN, ParamStore, Parameter, ops
from clusterrank.numcore.gradcheck import check_gradients
from clusterrank.synthetic import synthetic_corpus
from clusterrank.trainer import marginal_nll, oracle_loss, system_loss, train

from oracles import b3_count, ceaf_exhaustive, cluster_ranking_interpreter, muc_count
from support import random_table, small_config, tiny_config

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail=""):
        line = f"ACCEPTANCE {number} {title}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f" ({detail})"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


# ---------------------------------------------------------------- 1

def _random_partition(rng, vocab):
    items = list(rng.permutation(vocab)[: rng.integers(1, len(vocab) + 1)])
    n = int(rng.integers(1, min(8, len(items)) + 1))
    labels = rng.integers(0, n, size=len(items))
    return [c for c in ([items[j] for j in range(len(items)) if labels[j] == k] for k in range(n)) if c]


def test_criterion_1_scorer_fixtures(verdict):
    t0 = time.perf_counter()
    key, resp = [["a", "b", "c"]], [["a", "b"], ["c"]]
    fixtures = (abs(muc(key, resp).f1 - 2 / 3) < 1e-12 and abs(b_cubed(key, resp).f1 - 5 / 7) < 1e-12
                and abs(ceaf_phi4(key, resp).f1 - 0.5333333333333333) < 1e-6)
    bad = 0
    rng = np.random.default_rng(2024)
    for _ in range(50):
        vocab = [f"m{k}" for k in range(int(rng.integers(2, 16)))]
        k, r = _random_partition(rng, vocab), _random_partition(rng, vocab)
        m, b, c = muc(k, r), b_cubed(k, r), ceaf_phi4(k, r)
        ok = ((m.r_num, m.r_den) == muc_count(k, r) and (m.p_num, m.p_den) == muc_count(r, k)
              and abs(b.r_num - b3_count(k, r)[0]) < 1e-12 and abs(b.p_num - b3_count(r, k)[0]) < 1e-12
              and abs(c.r_num - ceaf_exhaustive(k, r)) < 1e-12)
        bad += not ok
    elapsed = time.perf_counter() - t0
    verdict(1, "scorer fixtures + 50 random partitions", fixtures and bad == 0 and elapsed < 10,
            f"fixtures={'ok' if fixtures else 'wrong'}, mismatches={bad}/50, {elapsed:.2f}s < 10s")


# ---------------------------------------------------------------- 2

def _off_kinks(store, rng):
    # zero-initialised biases put dead ReLU rows exactly on the kink, where FD is undefined
    for p in store:
        if p.name.endswith("/b"):
            p.data += rng.normal(scale=0.1, size=p.data.shape)


def _layer_checks(seed):
    """Max relative FD error per layer for one seed."""
    rng = np.random.default_rng(seed)
    out = {}

    store = ParamStore(rng)
    net = FFNN(store, "ffnn", 4, 2, 5, 2)
    _off_kinks(store, rng)
    x = Parameter(rng.normal(size=(3, 4)), "x")
    out["ffnn"] = max(check_gradients(lambda: ops.sum(ops.tanh(net(x))), [x] + list(store)).values())

    store = ParamStore(rng)
    cnn = CharCNN(store, "cnn", 7, 3, (2, 3), 3)
    ids = rng.integers(1, 7, size=(3, 5))
    out["char_cnn"] = max(check_gradients(lambda: ops.sum(ops.tanh(cnn(ids))), list(store)).values())

    store = ParamStore(rng)
    lstm = BiLSTM(store, "lstm", 3, 3, 2)
    xs = Parameter(rng.normal(size=(5, 3)), "xs")
    out["bilstm"] = max(check_gradients(lambda: ops.sum(ops.tanh(lstm(xs, [2, 3]))),
                                        [xs] + list(store)).values())

    cfg = tiny_config(bilstm_size=3, ffnn_size=4, feature_size=2, word_emb_dim=3, use_char_cnn=False)
    store = ParamStore(rng)
    enc = Encoder(cfg, store, HashedEmbeddings(3))
    _off_kinks(store, rng)
    xin = Parameter(rng.normal(size=(5, 3)), "x_in")
    xstar = Parameter(rng.normal(size=(5, 6)), "x_star")
    starts, ends = np.array([0, 1, 2, 4]), np.array([2, 1, 4, 4])
    span_params = [xin, xstar] + [p for p in store if p.name.startswith(("encoder/head", "encoder/width"))]
    out["span_repr"] = max(check_gradients(
        lambda: ops.sum(ops.tanh(enc.span_representations(xin, xstar, starts, ends))), span_params).values())

    store = ParamStore(rng)
    sc = ClusterScorerNet(store, 4, tiny_config(ffnn_size=4, feature_size=2), 2)
    _off_kinks(store, rng)
    reprs = Parameter(rng.normal(size=(4, 4)), "reprs")
    sm = Parameter(rng.normal(size=4), "s_m")
    member_idx = np.array([[0, 2], [1, 0]])
    valid = np.array([[True, True], [True, False]])

    def decoder_fn():
        eps = sc.epsilon_scores(reprs, sm)
        beta = sc.salience(reprs, [1, 1, 2, 1])
        _, c_rep, c_score = sc.summarize(ops.take(beta, member_idx), member_idx, valid, reprs, sm)
        pair = sc.pair_scores(reprs, sm, c_rep, c_score, [3, 3], [0, 1], [1, 0], [1, 2], [2, 1], 1)
        return ops.add(ops.sum(ops.tanh(eps)), ops.sum(ops.tanh(pair)))

    out["decoder"] = max(check_gradients(decoder_fn, [reprs, sm] + list(store)).values())

    s = Parameter(rng.normal(size=6) * 2, "scores")
    gold = sorted(set(rng.integers(0, 6, size=2).tolist()))
    out["marginal_nll"] = check_gradients(lambda: marginal_nll(s, gold), [s])["scores"]
    return out


def test_criterion_2_gradient_suite(verdict):
    t0 = time.perf_counter()
    worst = {}
    for seed in range(20):
        for name, err in _layer_checks(seed).items():
            worst[name] = max(worst.get(name, 0.0), err)
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    verdict(2, "finite-difference gradients, 20 seeds", top < 1e-4 and elapsed < 60,
            f"max rel err {top:.1e} < 1e-4; {detail}; {elapsed:.1f}s < 60s")


# ---------------------------------------------------------------- 3

def test_criterion_3_algorithm_conformance(verdict):
    t0 = time.perf_counter()
    runs = mismatches = 0
    for seed in range(100):
        for mode in ("prefilter", "hybrid", "fine"):
            fine = mode == "fine"
            for history in (True, False):
                rng = np.random.default_rng(seed)
                n = int(rng.integers(0, 7))
                eps, pair = random_table(rng, n, fine, tie_prone=seed % 2 == 0)
                res = cluster_rank(n, TableScorer(eps, pair, fine), mode=mode, threshold=0.5,
                                   history=history, max_clusters=250 if seed % 5 else 2)
                types = FINE_NR_TYPES if fine else (NRType.NR,)
                got = (sorted(res.clusters), sorted((m, types.index(t)) for m, t in res.nonreferring))
                want = cluster_ranking_interpreter(eps.tolist(), pair, mode, 0.5, history,
                                                   250 if seed % 5 else 2)
                runs += 1
                mismatches += got != want
    elapsed = time.perf_counter() - t0
    verdict(3, "decoder vs step-by-step interpreter", mismatches == 0 and elapsed < 30,
            f"{runs - mismatches}/{runs} tables agree (100 tables x 3 modes x history on/off), "
            f"{elapsed:.2f}s < 30s")


# ---------------------------------------------------------------- 4

def test_criterion_4_mode_identities(verdict):
    same_t0 = pure_post = 0
    for seed in range(100):
        rng = np.random.default_rng(10_000 + seed)
        n = int(rng.integers(1, 7))
        fine = bool(seed % 2)
        eps, pair = random_table(rng, n, fine, tie_prone=seed % 3 == 0)
        history = bool(seed % 4 < 2)
        sc = TableScorer(eps, pair, fine)
        a = cluster_rank(n, sc, mode="prefilter", history=history)
        b = cluster_rank(n, sc, mode="fine" if fine else "hybrid", threshold=0.0, history=history)
        same_t0 += a.clusters == b.clusters and a.nonreferring == b.nonreferring
        c = cluster_rank(n, sc, mode="fine" if fine else "hybrid", threshold=2.0, history=history)
        no_prefilter = not any(d.label.startswith("NR") for d in c.decisions)
        all_post = all(c.decisions[m].postfilter for m, _ in c.nonreferring)
        pure_post += no_prefilter and all_post
    verdict(4, "hybrid(t=0) == prefilter and hybrid(t=2) is pure postfiltering",
            same_t0 == 100 and pure_post == 100, f"t=0 identical {same_t0}/100, t=2 postfilter-only {pure_post}/100")


# ---------------------------------------------------------------- 5

OVERFIT_STEPS = 2000


def _overfit(seed, docs, weight):
    hist = []

    def ev(model):
        preds = [model.predict(d) for d in docs]
        rep = evaluate(docs, preds)
        hist.append((len(hist) + 1, rep.conll, rep.nr.f1))
        return rep.conll

    cfg = small_config(seed=seed, mention_loss_weight=weight, eval_frequency=250)
    train(cfg, docs, steps=OVERFIT_STEPS, eval_fn=ev)
    return [(k * 250, c, f) for k, c, f in hist]


@pytest.mark.slow
def test_criterion_5_overfit(verdict):
    t0 = time.perf_counter()
    docs = synthetic_corpus(10, seed=0)
    parts = []
    ok = True
    for seed in (0, 1, 2):
        hist = _overfit(seed, docs, 1.0)
        hit = next(((s, c, f) for s, c, f in hist if c >= 0.95 and f >= 0.90), None)
        ok &= hit is not None
        s, c, f = hit if hit else max(hist, key=lambda h: h[1])
        parts.append(f"seed {seed}: CoNLL {c:.3f} NR-F1 {f:.3f} at step {s}")
    # same run without the auxiliary mention loss, for the record
    plain = _overfit(0, docs, 0.0)[-1]
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 20 * 60
    verdict(5, "overfit 10 synthetic docs", ok,
            "; ".join(parts) + f"; without mention loss seed 0 ends at CoNLL {plain[1]:.3f} "
            f"NR-F1 {plain[2]:.3f}; {elapsed:.0f}s < 1200s")


# ---------------------------------------------------------------- 6

TREND_STEPS = 600


@pytest.mark.slow
def test_criterion_6_singleton_nr_trend(verdict):
    train_docs = synthetic_corpus(30, seed=100, prefix="train")
    held_out = synthetic_corpus(15, seed=200, prefix="heldout")
    deltas = []
    for seed in (0, 1, 2):
        score = {}
        for flag in (True, False):
            cfg = small_config(seed=seed, mention_loss_weight=1.0, train_with_singletons_nr=flag)
            model = train(cfg, train_docs, steps=TREND_STEPS).model
            score[flag] = evaluate(held_out, [model.predict(d) for d in held_out], singletons=False).conll
        deltas.append(score[True] - score[False])
    wins = sum(d >= 0 for d in deltas)
    verdict(6, "singletons+NR training helps singleton-excluded CoNLL", wins >= 2,
            f"{wins}/3 seeds >=, deltas " + ", ".join(f"{d:+.4f}" for d in deltas))


# ---------------------------------------------------------------- 7

def test_criterion_7_pruning_exhaustive(verdict):
    rng = np.random.default_rng(7)
    checked = violations = 0
    for T in range(1, 51):
        for l in (1, 2, 5, 10, 30):
            starts, ends = enumerate_spans(T, l)
            for scores in (rng.normal(size=len(starts)), rng.integers(0, 3, size=len(starts)).astype(float)):
                kept = prune_spans(starts, ends, scores, 0.4, T)
                spans = [(starts[k], ends[k]) for k in kept]
                bad = len(kept) > num_kept(T, 0.4) or len(kept) > max(1, int(0.4 * T))
                bad |= any(crosses(a, b) for a, b in itertools.combinations(spans, 2))
                checked += 1
                violations += bad
    verdict(7, "pruning never keeps crossing spans and keeps <= floor(0.4T)", violations == 0,
            f"{checked} configurations, T=1..50, {violations} violations")


# ---------------------------------------------------------------- 8

def test_criterion_8_oracle_vs_system_speed(verdict):
    docs = synthetic_corpus(10, seed=0)
    timing = {}
    for oracle in (True, False):
        cfg = small_config(seed=0, oracle_clusters=oracle)
        train(cfg, docs, steps=5)  # warm-up
        t0 = time.perf_counter()
        train(cfg, docs, steps=100)
        timing[oracle] = (time.perf_counter() - t0) / 100
    ratio = timing[False] / timing[True]
    verdict(8, "oracle vs system cluster training speed (informational)", True,
            f"oracle {1000 * timing[True]:.1f} ms/step, system {1000 * timing[False]:.1f} ms/step, "
            f"system/oracle = {ratio:.2f}x")
