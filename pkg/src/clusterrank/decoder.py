"""Greedy cluster ranking over pruned mentions.

Mentions are visited in text order. Each one is scored against every
candidate cluster state (live clusters, plus their earlier versions when
cluster history is on) and against the epsilon classes NO (not a mention),
NR (non-referring) and DN (discourse new). The decision logic in
:func:`cluster_rank` only needs a scorer object; :class:`ModelScorer`
supplies scores from the network.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from .corpus import FINE_NR_TYPES, NRType
from .corpus.buckets import (
    NUM_DISTANCE_BUCKETS,
    NUM_SIZE_BUCKETS,
    bucket_cluster_size,
    bucket_distance,
)
from .numcore import FFNN, ParamStore, Tensor, ops

MODES = ("prefilter", "hybrid", "fine")


class EpsKind(str, enum.Enum):
    NO = "NO"
    NR = "NR"
    DN = "DN"


@dataclass(frozen=True)
class EpsilonClass:
    kind: EpsKind
    nr_type: Optional[NRType] = None

    def __str__(self) -> str:
        if self.kind is EpsKind.NR and self.nr_type is not None and self.nr_type.is_fine:
            return f"NR:{self.nr_type.value}"
        return self.kind.value


def epsilon_classes(fine: bool) -> list[EpsilonClass]:
    """Column order of epsilon scores: NO, NR (or the five fine types), DN."""
    if fine:
        nr = [EpsilonClass(EpsKind.NR, t) for t in FINE_NR_TYPES]
    else:
        nr = [EpsilonClass(EpsKind.NR, NRType.NR)]
    return [EpsilonClass(EpsKind.NO)] + nr + [EpsilonClass(EpsKind.DN)]


def epsilon_index(label: EpsilonClass, fine: bool) -> int:
    classes = epsilon_classes(fine)
    if label.kind is EpsKind.NR and not fine:
        return 1
    return classes.index(label)


@dataclass
class ClusterState:
    """One version of a partial entity.

    ``members`` are mention indices in attachment order. ``latest`` points
    at the state that superseded this one (itself while live).
    """

    id: int
    members: tuple
    created: int
    latest: int
    entity: int
    weights: Optional[np.ndarray] = None
    salience: Optional[np.ndarray] = None
    repr: Optional[Tensor] = None
    score: Optional[Tensor] = None

    @property
    def live(self) -> bool:
        return self.latest == self.id

    @property
    def newest(self) -> int:
        return self.members[-1]


def latest(state_id: int, states: dict) -> int:
    """Follow latest-pointers to the live version; compresses the path."""
    if state_id not in states:
        raise KeyError(f"unknown cluster state {state_id}")
    path = []
    cur = state_id
    while states[cur].latest != cur:
        path.append(cur)
        cur = states[cur].latest
    for sid in path:
        states[sid].latest = cur
    return cur


@dataclass
class Decision:
    mention: int
    label: str                    # "DN", "NO", "NR[:type]" or "cluster"
    target: Optional[int] = None  # chosen state id (before Latest)
    score: float = 0.0
    confidence: float = 1.0
    postfilter: bool = False


@dataclass
class Resolution:
    """Clusters and non-referring markables over mention indices (or spans after mapping)."""

    clusters: list = field(default_factory=list)
    nonreferring: list = field(default_factory=list)
    decisions: list = field(default_factory=list)

    def map_spans(self, spans: Sequence[tuple[int, int]]) -> "Resolution":
        return Resolution(
            [[tuple(spans[m]) for m in c] for c in self.clusters],
            [(tuple(spans[m]), t) for m, t in self.nonreferring],
            self.decisions,
        )


class Scorer(Protocol):
    fine: bool

    def epsilon_scores(self, i: int) -> np.ndarray: ...

    def cluster_scores(self, i: int, states: Sequence[ClusterState]) -> np.ndarray: ...

    def on_create(self, state: ClusterState) -> None: ...


class TableScorer:
    """Scores from plain callables; for tests and external score tables.

    ``eps`` is ``[n, E]``; ``fn(i, members)`` gives the cluster score.
    """

    def __init__(self, eps: np.ndarray, fn, fine: bool = False):
        self.eps = np.asarray(eps, dtype=np.float64)
        self.fn = fn
        self.fine = fine

    def epsilon_scores(self, i):
        return self.eps[i]

    def cluster_scores(self, i, states):
        return np.array([self.fn(i, tuple(s.members)) for s in states], dtype=np.float64)

    def on_create(self, state):
        pass


def candidate_window(states: dict, order: list, history: bool, max_clusters: int) -> list:
    """Candidate states, oldest first, limited to the ``max_clusters`` most recent."""
    if history:
        cands = [states[sid] for sid in order]
    else:
        cands = [states[sid] for sid in order if states[sid].live]
    return cands[-max_clusters:] if max_clusters > 0 else []


def _collapse(eps: np.ndarray, fine: bool) -> tuple[float, float, float, int]:
    """(NO, NR, DN) scores and the arg-max fine NR column."""
    if fine:
        nr_cols = eps[1:1 + len(FINE_NR_TYPES)]
        k = int(np.argmax(nr_cols))
        return float(eps[0]), float(nr_cols[k]), float(eps[-1]), k
    return float(eps[0]), float(eps[1]), float(eps[2]), 0


def _pick(values: np.ndarray, priority: list[int]) -> int:
    """Arg-max of ``values`` with ties resolved by position in ``priority``."""
    best = max(values[k] for k in priority)
    for k in priority:
        if values[k] == best:
            return k
    raise AssertionError("empty priority list")


def _softmax(v: np.ndarray) -> np.ndarray:
    e = np.exp(v - v.max())
    return e / e.sum()


def cluster_rank(num_mentions: int, scorer: Scorer, mode: str = "hybrid", threshold: float = 0.5,
                 history: bool = True, max_clusters: int = 250) -> Resolution:
    """Resolve mentions ``0..num_mentions-1`` left to right.

    Decision vector per mention is ``[clusters (oldest..newest), NO, NR, DN]``
    (fine NR columns collapsed by max). Exact ties prefer DN, then the most
    recent cluster, then NR, then NO. In ``prefilter`` mode an NR arg-max
    drops the mention; in ``hybrid``/``fine`` it does so only when its
    softmax probability exceeds ``threshold``, otherwise the best cluster/DN
    choice is taken and the mention becomes a postfilter candidate. NO is
    always honored.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    fine = scorer.fine
    nr_types = FINE_NR_TYPES if fine else (NRType.NR,)
    states: dict[int, ClusterState] = {}
    order: list[int] = []
    next_id = 0
    prefiltered: list[tuple[int, NRType]] = []
    remembered: dict[int, NRType] = {}
    decisions: list[Decision] = []

    def new_state(members, created, entity=None):
        nonlocal next_id
        sid = next_id
        next_id += 1
        st = ClusterState(sid, tuple(members), created, sid, sid if entity is None else entity)
        states[sid] = st
        order.append(sid)
        scorer.on_create(st)
        return st

    for i in range(num_mentions):
        cands = candidate_window(states, order, history, max_clusters)
        eps = np.asarray(scorer.epsilon_scores(i), dtype=np.float64)
        cscores = np.asarray(scorer.cluster_scores(i, cands), dtype=np.float64) if cands else np.zeros(0)
        no, nr, dn, fine_k = _collapse(eps, fine)
        n_c = len(cands)
        values = np.concatenate([cscores, [no, nr, dn]])
        i_no, i_nr, i_dn = n_c, n_c + 1, n_c + 2
        recent_first = list(range(n_c - 1, -1, -1))
        choice = _pick(values, [i_dn] + recent_first + [i_nr, i_no])
        probs = _softmax(values)
        nr_type = nr_types[fine_k]

        if choice == i_no:
            decisions.append(Decision(i, "NO", score=values[choice], confidence=probs[choice]))
            continue
        if choice == i_nr:
            if mode == "prefilter" or probs[i_nr] > threshold:
                prefiltered.append((i, nr_type))
                decisions.append(Decision(i, str(EpsilonClass(EpsKind.NR, nr_type)),
                                          score=values[choice], confidence=probs[choice]))
                continue
            remembered[i] = nr_type
            choice = _pick(values, [i_dn] + recent_first)
        if choice == i_dn:
            new_state((i,), i)
            decisions.append(Decision(i, "DN", score=values[choice], confidence=probs[choice],
                                      postfilter=i in remembered))
            continue
        picked = cands[choice]
        target = states[latest(picked.id, states)]
        st = new_state(target.members + (i,), i, target.entity)
        target.latest = st.id
        decisions.append(Decision(i, "cluster", target=picked.id, score=values[choice],
                                  confidence=probs[choice], postfilter=i in remembered))

    live = [states[sid] for sid in order if states[sid].live]
    clusters = []
    nonref = list(prefiltered)
    for st in live:
        if len(st.members) == 1 and st.members[0] in remembered:
            nonref.append((st.members[0], remembered[st.members[0]]))
        else:
            clusters.append(list(st.members))
    clusters.sort(key=lambda c: c[0])
    nonref.sort()
    return Resolution(clusters, nonref, decisions)


# ---------------------------------------------------------------------------
# network scorers


class ClusterScorerNet:
    """Epsilon, salience and pairwise scoring networks plus feature embeddings."""

    def __init__(self, store: ParamStore, span_dim: int, config, num_genres: int):
        c = config
        self.config = c
        self.fine = c.nr_mode == "fine"
        self.num_eps = len(epsilon_classes(self.fine))
        f = c.feature_size
        self.eps_ffnn = FFNN(store, "decoder/epsilon", span_dim, c.ffnn_layers, c.ffnn_size,
                             self.num_eps, c.ffnn_dropout)
        self.position_emb = None
        beta_in = span_dim
        if c.use_position_emb:
            self.position_emb = store.create("decoder/position_emb", (NUM_SIZE_BUCKETS, f))
            beta_in += f
        self.beta_ffnn = FFNN(store, "decoder/salience", beta_in, c.ffnn_layers, c.ffnn_size, 1,
                              c.ffnn_dropout)
        self.genre_emb = store.create("decoder/genre_emb", (num_genres + 1, f))
        self.speaker_emb = store.create("decoder/same_speaker_emb", (2, f))
        self.distance_emb = store.create("decoder/distance_emb", (NUM_DISTANCE_BUCKETS, f))
        self.size_emb = store.create("decoder/size_emb", (NUM_SIZE_BUCKETS, f))
        self.pair_ffnn = FFNN(store, "decoder/pair", 3 * span_dim + 4 * f, c.ffnn_layers, c.ffnn_size,
                              1, c.ffnn_dropout)

    def epsilon_scores(self, reprs: Tensor, mention_scores: Tensor, rng=None) -> Tensor:
        """``[K, E]``: NO column is the raw net output; NR/DN columns add the mention score."""
        raw = self.eps_ffnn(reprs, rng)
        k = reprs.shape[0]
        add_m = np.ones((1, self.num_eps))
        add_m[0, 0] = 0.0
        return ops.add(raw, ops.mul(ops.reshape(mention_scores, (k, 1)), add_m))

    def salience(self, reprs: Tensor, positions, rng=None) -> Tensor:
        """Salience logits for mentions at 1-based cluster ``positions``, ``[K]``."""
        x = reprs
        if self.position_emb is not None:
            buckets = np.array([bucket_cluster_size(int(p)) for p in positions], dtype=np.int64)
            x = ops.concat([reprs, ops.take(self.position_emb, buckets)], axis=-1)
        return ops.reshape(self.beta_ffnn(x, rng), (reprs.shape[0],))

    def salience_table(self, reprs: Tensor, rng=None) -> Tensor:
        """Salience for every mention at every position bucket, ``[K, 8]`` (or ``[K, 1]``)."""
        k = reprs.shape[0]
        if self.position_emb is None:
            return ops.reshape(self.beta_ffnn(reprs, rng), (k, 1))
        rows = np.repeat(np.arange(k), NUM_SIZE_BUCKETS)
        buckets = np.tile(np.arange(NUM_SIZE_BUCKETS), k)
        x = ops.concat([ops.take(reprs, rows), ops.take(self.position_emb, buckets)], axis=-1)
        return ops.reshape(self.beta_ffnn(x, rng), (k, NUM_SIZE_BUCKETS))

    @staticmethod
    def summarize(member_beta: Tensor, member_idx: np.ndarray, valid: np.ndarray, reprs: Tensor,
                  mention_scores: Tensor):
        """Attention over padded member lists ``[S, P]``.

        Returns ``(weights [S, P], cluster repr [S, D], cluster score [S])``.
        """
        mask = np.where(valid, 0.0, -np.inf)
        weights = ops.softmax(ops.add(member_beta, mask), axis=1)
        s, p = member_idx.shape
        rep = ops.sum(ops.mul(ops.reshape(weights, (s, p, 1)), ops.take(reprs, member_idx)), axis=1)
        score = ops.sum(ops.mul(weights, ops.take(mention_scores, member_idx)), axis=1)
        return weights, rep, score

    def pair_scores(self, reprs: Tensor, mention_scores: Tensor, cluster_reprs: Tensor,
                    cluster_scores: Tensor, mention_idx, state_idx, same_speaker, distance, size,
                    genre: int, rng=None) -> Tensor:
        """``s_m(i) + s_c(j) + s_mc(i, j)`` for each (mention, state) pair."""
        mention_idx = np.asarray(mention_idx, dtype=np.int64)
        state_idx = np.asarray(state_idx, dtype=np.int64)
        q = mention_idx.shape[0]
        n_i = ops.take(reprs, mention_idx)
        c_j = ops.take(cluster_reprs, state_idx)
        dist_b = np.array([bucket_distance(int(d)) for d in distance], dtype=np.int64)
        size_b = np.array([bucket_cluster_size(int(n)) for n in size], dtype=np.int64)
        feats = [
            n_i, c_j, ops.mul(n_i, c_j),
            ops.take(self.genre_emb, np.full(q, genre, dtype=np.int64)),
            ops.take(self.speaker_emb, np.asarray(same_speaker, dtype=np.int64)),
            ops.take(self.distance_emb, dist_b),
            ops.take(self.size_emb, size_b),
        ]
        mc = ops.reshape(self.pair_ffnn(ops.concat(feats, axis=-1), rng), (q,))
        return ops.add(ops.add(ops.take(mention_scores, mention_idx), ops.take(cluster_scores, state_idx)), mc)


class ModelScorer:
    """Adapts :class:`ClusterScorerNet` on one encoded document to :func:`cluster_rank`.

    Keeps the score tensors of every step in ``steps`` so a loss can be
    built over the decoder's own states.
    """

    def __init__(self, net: ClusterScorerNet, reprs: Tensor, mention_scores: Tensor,
                 speakers: Sequence, genre: int, rng=None):
        self.net = net
        self.fine = net.fine
        self.reprs = reprs
        self.mention_scores = mention_scores
        self.speakers = list(speakers)
        self.genre = genre
        self.rng = rng
        k = reprs.shape[0]
        self.eps = net.epsilon_scores(reprs, mention_scores, rng) if k else None
        self.beta = net.salience_table(reprs, rng) if k else None
        self.steps: dict[int, tuple] = {}

    def on_create(self, state: ClusterState) -> None:
        members = np.asarray(state.members, dtype=np.int64)
        if self.net.position_emb is not None:
            cols = np.array([bucket_cluster_size(p + 1) for p in range(len(members))], dtype=np.int64)
        else:
            cols = np.zeros(len(members), dtype=np.int64)
        beta = ops.index(self.beta, (members, cols))
        weights, rep, score = self.net.summarize(
            ops.reshape(beta, (1, len(members))), members[None, :], np.ones((1, len(members)), bool),
            self.reprs, self.mention_scores,
        )
        state.salience = beta.data.copy()
        state.weights = weights.data[0].copy()
        state.repr = ops.reshape(rep, (rep.shape[1],))
        state.score = ops.reshape(score, ())

    def epsilon_scores(self, i: int) -> np.ndarray:
        return self.eps.data[i]

    def cluster_scores(self, i: int, states: Sequence[ClusterState]) -> np.ndarray:
        cluster_reprs = ops.stack([s.repr for s in states])
        cluster_scores = ops.stack([s.score for s in states])
        n = len(states)
        same = [int(self.speakers[i] == self.speakers[s.newest]) for s in states]
        dist = [i - s.newest for s in states]
        size = [len(s.members) for s in states]
        scores = self.net.pair_scores(
            self.reprs, self.mention_scores, cluster_reprs, cluster_scores,
            np.full(n, i), np.arange(n), same, dist, size, self.genre, self.rng,
        )
        self.steps[i] = (scores, list(states))
        return scores.data

    def step_scores(self, i: int) -> tuple[Tensor, list]:
        """Full candidate vector ``[clusters..., eps...]`` for mention ``i`` and its states."""
        eps_row = ops.index(self.eps, i)
        if i in self.steps:
            scores, states = self.steps[i]
            return ops.concat([scores, eps_row]), states
        return eps_row, []
