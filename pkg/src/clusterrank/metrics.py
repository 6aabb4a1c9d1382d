"""Coreference and non-referring scores: MUC, B-cubed, CEAF-phi4, CoNLL average, NR P/R/F1.

Every metric returns raw numerator/denominator counts so scores can be
micro-aggregated over a corpus, as the reference scorers do.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import FINE_NR_TYPES, Document, NRType

NR_WEIGHT = 0.15


class MetricError(ValueError):
    pass


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


@dataclass
class PRF:
    p_num: float = 0.0
    p_den: float = 0.0
    r_num: float = 0.0
    r_den: float = 0.0

    @property
    def precision(self) -> float:
        return _ratio(self.p_num, self.p_den)

    @property
    def recall(self) -> float:
        return _ratio(self.r_num, self.r_den)

    @property
    def f1(self) -> float:
        return f1(self.precision, self.recall)

    def __iter__(self):
        yield self.precision
        yield self.recall
        yield self.f1

    def __add__(self, other: "PRF") -> "PRF":
        return PRF(self.p_num + other.p_num, self.p_den + other.p_den,
                   self.r_num + other.r_num, self.r_den + other.r_den)

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


Partition = Sequence[Iterable[Hashable]]


def _as_sets(partition: Partition, singletons: bool = True) -> list[frozenset]:
    sets = []
    seen = set()
    for cluster in partition:
        items = list(cluster)
        s = frozenset(items)
        if len(s) != len(items) or seen & s:
            dup = [m for m, c in Counter(items).items() if c > 1] or sorted(seen & s, key=repr)
            raise MetricError(f"mention {dup[0]!r} appears more than once in a partition")
        seen |= s
        if s and (singletons or len(s) > 1):
            sets.append(s)
    return sets


def _muc_side(a: list[frozenset], b: list[frozenset]) -> tuple[float, float]:
    where = {m: k for k, c in enumerate(b) for m in c}
    num = den = 0
    for cluster in a:
        parts = set()
        unaligned = 0
        for m in cluster:
            if m in where:
                parts.add(where[m])
            else:
                unaligned += 1
        num += len(cluster) - (len(parts) + unaligned)
        den += len(cluster) - 1
    return num, den


def muc(key: Partition, response: Partition, singletons: bool = True) -> PRF:
    """Link-based MUC. Size-1 clusters carry no links either way."""
    k, r = _as_sets(key, singletons), _as_sets(response, singletons)
    r_num, r_den = _muc_side(k, r)
    p_num, p_den = _muc_side(r, k)
    return PRF(p_num, p_den, r_num, r_den)


def _b3_side(a: list[frozenset], b: list[frozenset]) -> tuple[float, float]:
    where = {m: k for k, c in enumerate(b) for m in c}
    num = 0.0
    den = 0
    for cluster in a:
        overlap = Counter(where[m] for m in cluster if m in where)
        num += sum(n * n for n in overlap.values()) / len(cluster)
        den += len(cluster)
    return num, den


def b_cubed(key: Partition, response: Partition, singletons: bool = True) -> PRF:
    k, r = _as_sets(key, singletons), _as_sets(response, singletons)
    r_num, r_den = _b3_side(k, r)
    p_num, p_den = _b3_side(r, k)
    return PRF(p_num, p_den, r_num, r_den)


def phi4(a: frozenset, b: frozenset) -> float:
    return 2.0 * len(a & b) / (len(a) + len(b))


def ceaf_phi4(key: Partition, response: Partition, singletons: bool = True) -> PRF:
    """Entity-level CEAF with the phi4 similarity and an optimal one-to-one alignment."""
    k, r = _as_sets(key, singletons), _as_sets(response, singletons)
    total = 0.0
    if k and r:
        sim = np.array([[phi4(a, b) for b in r] for a in k])
        rows, cols = linear_sum_assignment(sim, maximize=True)
        total = float(sim[rows, cols].sum())
    return PRF(total, len(r), total, len(k))


def nr_score(gold: Iterable, predicted: Iterable, fine: bool = False):
    """Set P/R/F1 over non-referring markables.

    Items are ``(span, NRType)``. With ``fine`` the type must match too.
    Returns ``(overall PRF, {type name: PRF})``; the per-type rows restrict
    both sides to one fine type and are only produced with ``fine``.
    """
    gold = list(gold)
    predicted = list(predicted)

    def key(item):
        span, t = item
        return (tuple(span), t) if fine else tuple(span)

    g = {key(x) for x in gold}
    p = {key(x) for x in predicted}
    tp = len(g & p)
    overall = PRF(tp, len(p), tp, len(g))
    per_type = {}
    for t in FINE_NR_TYPES if fine else ():
        gt = {tuple(s) for s, tt in gold if tt == t}
        pt = {tuple(s) for s, tt in predicted if tt == t}
        if gt or pt:
            hit = len(gt & pt)
            per_type[t.value] = PRF(hit, len(pt), hit, len(gt))
    return overall, per_type


@dataclass
class EvalReport:
    muc: PRF
    b_cubed: PRF
    ceaf_phi4: PRF
    nr: PRF
    nr_per_type: dict = field(default_factory=dict)
    singletons: bool = True
    has_nr: bool = False

    @property
    def conll(self) -> float:
        return (self.muc.f1 + self.b_cubed.f1 + self.ceaf_phi4.f1) / 3.0

    @property
    def weighted(self) -> float:
        if not self.has_nr:
            return self.conll
        return (1.0 - NR_WEIGHT) * self.conll + NR_WEIGHT * self.nr.f1

    def to_dict(self) -> dict:
        return {
            "singletons": "included" if self.singletons else "excluded",
            "muc": self.muc.as_dict(),
            "b_cubed": self.b_cubed.as_dict(),
            "ceaf_phi4": self.ceaf_phi4.as_dict(),
            "conll": self.conll,
            "nr": self.nr.as_dict(),
            "nr_per_type": {k: v.as_dict() for k, v in self.nr_per_type.items()},
            "weighted": self.weighted,
        }

    def format(self) -> str:
        title = "Singletons " + ("included" if self.singletons else "excluded")
        lines = [title, f"{'metric':<12}{'P':>8}{'R':>8}{'F1':>8}"]
        for name, prf in (("MUC", self.muc), ("B3", self.b_cubed), ("CEAF_phi4", self.ceaf_phi4)):
            lines.append(f"{name:<12}{100 * prf.precision:8.2f}{100 * prf.recall:8.2f}{100 * prf.f1:8.2f}")
        lines.append(f"{'CoNLL avg':<12}{'':>16}{100 * self.conll:8.2f}")
        lines.append(f"{'NR':<12}{100 * self.nr.precision:8.2f}{100 * self.nr.recall:8.2f}{100 * self.nr.f1:8.2f}")
        for name, prf in self.nr_per_type.items():
            lines.append(f"  {name:<10}{100 * prf.precision:8.2f}{100 * prf.recall:8.2f}{100 * prf.f1:8.2f}")
        lines.append(f"{'Weighted':<12}{'':>16}{100 * self.weighted:8.2f}")
        return "\n".join(lines)


def evaluate(keys: Sequence[Document], responses: Sequence[Document], singletons: bool = True,
             fine: bool = False) -> EvalReport:
    """Corpus-level report; documents are matched by ``doc_key``."""
    resp_by_key = {d.doc_key: d for d in responses}
    key_keys = [d.doc_key for d in keys]
    missing = sorted(set(key_keys) - set(resp_by_key))
    extra = sorted(set(resp_by_key) - set(key_keys))
    if missing or extra:
        parts = []
        if missing:
            parts.append("missing from response: " + ", ".join(missing))
        if extra:
            parts.append("not in key: " + ", ".join(extra))
        raise MetricError("document sets differ (" + "; ".join(parts) + ")")
    m = b = c = nr = PRF()
    per_type: dict[str, PRF] = {}
    has_nr = False
    for key in keys:
        resp = resp_by_key[key.doc_key]
        m = m + muc(key.clusters, resp.clusters, singletons)
        b = b + b_cubed(key.clusters, resp.clusters, singletons)
        c = c + ceaf_phi4(key.clusters, resp.clusters, singletons)
        overall, types = nr_score(key.nonreferring, resp.nonreferring, fine)
        nr = nr + overall
        for t, prf in types.items():
            per_type[t] = per_type.get(t, PRF()) + prf
        has_nr = has_nr or bool(key.nonreferring) or bool(resp.nonreferring)
    return EvalReport(m, b, c, nr, per_type, singletons, has_nr)


def report(key: Document, response: Document, singletons: bool = True, fine: bool = False) -> EvalReport:
    if key.doc_key != response.doc_key:
        raise MetricError(f"doc_key mismatch: {key.doc_key!r} vs {response.doc_key!r}")
    return evaluate([key], [response], singletons, fine)


def reports_to_json(reports: Sequence[EvalReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)
