"""Oracle-cluster training with a marginal log-likelihood objective."""
from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .config import TrainConfig
from .corpus import Document, NRType
from .decoder import EpsilonClass, EpsKind, cluster_rank, epsilon_classes, epsilon_index
from .model import CorefModel
from .numcore import Adam, Tensor, backward, load_checkpoint, ops, save_checkpoint

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OracleState:
    """Prefix of one gold cluster restricted to kept mentions."""

    entity: int
    members: tuple

    @property
    def created(self) -> int:
        return self.members[-1]


@dataclass
class OracleStep:
    mention: int
    candidates: list            # indices into the oracle state list, oldest first
    gold_states: list           # subset of candidates
    gold_epsilon: Optional[EpsilonClass] = None

    def gold_positions(self, fine: bool) -> list[int]:
        """Positions within ``[candidates..., epsilon classes...]``."""
        if self.gold_epsilon is not None:
            return [len(self.candidates) + epsilon_index(self.gold_epsilon, fine)]
        return [self.candidates.index(s) for s in self.gold_states]


def gold_labels(spans: Sequence[tuple[int, int]], clusters, nonreferring):
    """Per kept span: gold cluster id (or None) and gold NR type (or None)."""
    cluster_of = {tuple(sp): k for k, c in enumerate(clusters) for sp in c}
    nr_of = {tuple(sp): t for sp, t in nonreferring}
    return [cluster_of.get(tuple(sp)) for sp in spans], [nr_of.get(tuple(sp)) for sp in spans]


def epsilon_target(cluster_id, nr_type: Optional[NRType], fine: bool) -> EpsilonClass:
    if cluster_id is not None:
        return EpsilonClass(EpsKind.DN)
    if nr_type is not None:
        if fine:
            if not nr_type.is_fine:
                raise ValueError("fine NR training needs fine-typed non-referring annotations")
            return EpsilonClass(EpsKind.NR, nr_type)
        return EpsilonClass(EpsKind.NR, NRType.NR)
    return EpsilonClass(EpsKind.NO)


def build_oracle_states(spans: Sequence[tuple[int, int]], clusters, nonreferring, history: bool = True,
                        max_clusters: int = 250, fine: bool = False):
    """Oracle partial clusters from kept spans grouped by gold cluster id.

    Returns ``(states, steps)``. Spans match gold only on exact boundaries.
    """
    cluster_ids, nr_types = gold_labels(spans, clusters, nonreferring)
    members: dict[int, list[int]] = {}
    states: list[OracleState] = []
    state_index: dict[tuple, int] = {}
    for i, cid in enumerate(cluster_ids):
        if cid is None:
            continue
        members.setdefault(cid, []).append(i)
        st = OracleState(cid, tuple(members[cid]))
        state_index[st.members] = len(states)
        states.append(st)
    steps = []
    for i, cid in enumerate(cluster_ids):
        if history:
            cands = [k for k, st in enumerate(states) if st.created < i]
        else:
            cands = []
            for ent, mem in members.items():
                prior = [m for m in mem if m < i]
                if prior:
                    cands.append(state_index[tuple(prior)])
            cands.sort(key=lambda k: states[k].created)
        cands = cands[-max_clusters:] if max_clusters > 0 else []
        gold = [k for k in cands if cid is not None and states[k].entity == cid]
        eps = None if gold else epsilon_target(cid, nr_types[i], fine)
        steps.append(OracleStep(i, cands, gold, eps))
    return states, steps


def marginal_nll(scores: Tensor, gold: Sequence[int]) -> Tensor:
    """``-log sum_{g in gold} softmax(scores)[g]`` for one mention."""
    gold = list(gold)
    if not gold:
        raise ValueError("empty gold set")
    return ops.sub(ops.logsumexp(scores), ops.logsumexp(ops.take(scores, gold)))


def mention_detection_loss(encoded, clusters, nonreferring) -> Tensor:
    """Summed sigmoid cross-entropy of ``s_m`` over every candidate span.

    Gold markables (cluster members and non-referring spans) are positives.
    """
    gold = {tuple(sp) for c in clusters for sp in c} | {tuple(sp) for sp, _ in nonreferring}
    y = np.array([(int(s), int(e)) in gold for s, e in zip(encoded.starts, encoded.ends)], dtype=np.float64)
    s = encoded.all_scores
    n = s.shape[0]
    pair = ops.concat([Tensor(np.zeros((n, 1))), ops.reshape(s, (n, 1))], axis=1)
    return ops.sum(ops.sub(ops.logsumexp(pair, axis=1), ops.mul(s, y)))


def _with_mention_loss(loss: Tensor, model: CorefModel, encoded, doc: Document) -> Tensor:
    w = model.config.mention_loss_weight
    if w <= 0:
        return loss
    return ops.add(loss, ops.mul(mention_detection_loss(encoded, doc.clusters, doc.nonreferring), w))


def _positions(states: Sequence[OracleState], k: int) -> np.ndarray:
    pos = np.ones(k, dtype=np.int64)
    for st in states:
        pos[st.members[-1]] = len(st.members)
    return pos


def oracle_loss(model: CorefModel, doc: Document, rng=None, history: Optional[bool] = None):
    """Summed marginal NLL over kept mentions against oracle clusters; None if nothing kept."""
    c = model.config
    history = c.use_history if history is None else history
    net = model.scorer
    encoded = model.encoder.encode(doc, rng)
    spans = encoded.kept_spans
    k = len(spans)
    if k == 0:
        return None
    fine = model.fine
    states, steps = build_oracle_states(spans, doc.clusters, doc.nonreferring, history,
                                        c.max_clusters, fine)
    reprs, s_m = encoded.reprs, encoded.scores
    eps = net.epsilon_scores(reprs, s_m, rng)
    n_eps = eps.shape[1]

    pair_m, pair_s = [], []
    for step in steps:
        for s in step.candidates:
            pair_m.append(step.mention)
            pair_s.append(s)
    q = len(pair_m)
    parts = []
    if q:
        beta = net.salience(reprs, _positions(states, k), rng)
        width = max(len(st.members) for st in states)
        member_idx = np.zeros((len(states), width), dtype=np.int64)
        valid = np.zeros((len(states), width), dtype=bool)
        for r, st in enumerate(states):
            member_idx[r, :len(st.members)] = st.members
            valid[r, :len(st.members)] = True
        _, c_reprs, c_scores = net.summarize(ops.take(beta, member_idx), member_idx, valid, reprs, s_m)
        speakers = model.mention_speakers(encoded)
        newest = [states[s].members[-1] for s in pair_s]
        same = [int(speakers[i] == speakers[j]) for i, j in zip(pair_m, newest)]
        dist = [i - j for i, j in zip(pair_m, newest)]
        size = [len(states[s].members) for s in pair_s]
        parts.append(net.pair_scores(reprs, s_m, c_reprs, c_scores, pair_m, pair_s, same, dist, size,
                                     model.genre_id(doc.genre), rng))
    parts.append(ops.reshape(eps, (k * n_eps,)))
    parts.append(Tensor(np.array([-np.inf])))
    flat = ops.concat(parts)
    pad = q + k * n_eps

    width_all = max(len(st.candidates) for st in steps) + n_eps
    all_idx = np.full((k, width_all), pad, dtype=np.int64)
    gold_sets = [st.gold_positions(fine) for st in steps]
    gold_idx = np.full((k, max(len(g) for g in gold_sets)), pad, dtype=np.int64)
    offset = 0
    for i, step in enumerate(steps):
        nc = len(step.candidates)
        row = list(range(offset, offset + nc)) + [q + i * n_eps + e for e in range(n_eps)]
        all_idx[i, :len(row)] = row
        gold_idx[i, :len(gold_sets[i])] = [row[g] for g in gold_sets[i]]
        offset += nc
    loss = ops.sub(ops.logsumexp(ops.take(flat, all_idx), axis=1),
                   ops.logsumexp(ops.take(flat, gold_idx), axis=1))
    return _with_mention_loss(ops.sum(loss), model, encoded, doc)


def system_loss(model: CorefModel, doc: Document, rng=None, history: Optional[bool] = None):
    """Same objective over the decoder's own greedy cluster states."""
    c = model.config
    history = c.use_history if history is None else history
    encoded = model.encoder.encode(doc, rng)
    spans = encoded.kept_spans
    k = len(spans)
    if k == 0:
        return None
    fine = model.fine
    cluster_ids, nr_types = gold_labels(spans, doc.clusters, doc.nonreferring)
    scorer = model.model_scorer(encoded, rng)
    cluster_rank(k, scorer, mode=c.nr_mode, threshold=c.threshold, history=history,
                 max_clusters=c.max_clusters)
    losses = []
    for i in range(k):
        vec, states = scorer.step_scores(i)
        cid = cluster_ids[i]
        gold = []
        if cid is not None:
            gold = [p for p, st in enumerate(states) if any(cluster_ids[m] == cid for m in st.members)]
        if not gold:
            gold = [len(states) + epsilon_index(epsilon_target(cid, nr_types[i], fine), fine)]
        losses.append(marginal_nll(vec, gold))
    return _with_mention_loss(ops.sum(ops.stack(losses)), model, encoded, doc)


def prepare_training_docs(docs: Sequence[Document], config: TrainConfig) -> list[Document]:
    out = []
    for d in docs:
        if not config.train_with_singletons_nr:
            d = d.without_singletons_and_nr()
        if config.max_train_tokens > 0:
            out.extend(d.split(config.max_train_tokens))
        else:
            out.append(d)
    return out


@dataclass
class TrainResult:
    model: CorefModel
    losses: list = field(default_factory=list)
    best_score: Optional[float] = None
    best_step: Optional[int] = None
    steps_run: int = 0
    seconds_per_step: float = 0.0


def save_model(path: str, model: CorefModel, optimizer: Optional[Adam] = None,
               run_config: Optional[dict] = None, extra: Optional[dict] = None) -> None:
    cfg = run_config if run_config is not None else {"model": model.config.to_dict()}
    save_checkpoint(path, model.store.state_dict(), optimizer.state_dict() if optimizer else None,
                    cfg, extra)


def load_model(path: str, config: Optional[TrainConfig] = None) -> CorefModel:
    ckpt = load_checkpoint(path)
    if config is None:
        config = TrainConfig.from_dict(ckpt["config"]["model"])
    model = CorefModel(config)
    model.store.load_state_dict(ckpt["params"])
    return model


def train(config: TrainConfig, train_docs: Sequence[Document], dev_docs: Optional[Sequence[Document]] = None,
          output_dir: Optional[str] = None, steps: Optional[int] = None,
          eval_fn: Optional[Callable[[CorefModel], float]] = None, run_config: Optional[dict] = None,
          log_stream=None, model: Optional[CorefModel] = None) -> TrainResult:
    """Train for ``steps`` (default ``config.train_steps``) single-document updates.

    Writes ``latest.ckpt`` and, when a dev set or ``eval_fn`` is given,
    ``best.ckpt`` chosen by dev CoNLL average. ``log_stream`` receives one
    ``step loss lr timestamp`` line every ``log_frequency`` steps.
    """
    if not config.genres:
        config.genres = sorted({d.genre for d in train_docs})
    if model is None:
        model = CorefModel(config)
    rng = np.random.default_rng(config.seed)
    docs = prepare_training_docs(train_docs, config)
    if not docs:
        raise ValueError("no training documents")
    steps = config.train_steps if steps is None else steps
    opt = Adam(model.store, lr=config.learning_rate, decay_rate=config.decay_rate,
               decay_frequency=config.decay_frequency)
    if eval_fn is None and dev_docs:
        eval_fn = lambda m: dev_conll(m, dev_docs)  # noqa: E731
    result = TrainResult(model)
    loss_fn = oracle_loss if config.oracle_clusters else system_loss
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
    order: list[int] = []
    window: list[float] = []
    started = time.perf_counter()
    for step in range(1, steps + 1):
        if not order:
            order = list(rng.permutation(len(docs)))
        doc = docs[order.pop()]
        loss = loss_fn(model, doc, rng)
        if loss is None:
            continue
        value = float(loss.data)
        if not math.isfinite(value):
            log.warning("step %d: non-finite loss on %s, skipped", step, doc.doc_key)
            opt.zero_grad()
            continue
        backward(loss)
        opt.step()
        opt.zero_grad()
        result.losses.append(value)
        window.append(value)
        result.steps_run = step
        if log_stream is not None and step % config.log_frequency == 0:
            log_stream.write(f"step={step} loss={np.mean(window):.6f} lr={opt.lr:.8g} time={time.time():.3f}\n")
            log_stream.flush()
            window = []
        if eval_fn is not None and step % config.eval_frequency == 0:
            score = eval_fn(model)
            log.info("step %d dev score %.4f", step, score)
            if result.best_score is None or score > result.best_score:
                result.best_score, result.best_step = score, step
                if output_dir:
                    save_model(os.path.join(output_dir, "best.ckpt"), model, opt, run_config,
                               {"step": step, "dev_conll": score})
    elapsed = time.perf_counter() - started
    result.seconds_per_step = elapsed / max(1, steps)
    if eval_fn is not None and (result.best_step is None or result.steps_run % config.eval_frequency):
        score = eval_fn(model)
        if result.best_score is None or score > result.best_score:
            result.best_score, result.best_step = score, result.steps_run
            if output_dir:
                save_model(os.path.join(output_dir, "best.ckpt"), model, opt, run_config,
                           {"step": result.steps_run, "dev_conll": score})
    if output_dir:
        save_model(os.path.join(output_dir, "latest.ckpt"), model, opt, run_config,
                   {"step": result.steps_run})
    return result


def dev_conll(model: CorefModel, docs: Sequence[Document], singletons: bool = True) -> float:
    from .metrics import evaluate

    preds = [model.predict(d) for d in docs]
    return evaluate(docs, preds, singletons=singletons, fine=model.fine).conll
