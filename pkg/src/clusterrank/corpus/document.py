from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional

Span = tuple[int, int]


class CorpusError(ValueError):
    """Malformed or inconsistent corpus input."""


class NRType(str, enum.Enum):
    EXPLETIVE = "Expletive"
    PREDICATE = "Predicate"
    QUANTIFIER = "Quantifier"
    COORDINATION = "Coordination"
    IDIOM = "Idiom"
    NR = "NR"

    def collapse(self) -> "NRType":
        return NRType.NR

    @property
    def is_fine(self) -> bool:
        return self is not NRType.NR

    @classmethod
    def parse(cls, value: str) -> "NRType":
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        raise CorpusError(f"unknown non-referring type {value!r}")


FINE_NR_TYPES: tuple[NRType, ...] = (
    NRType.EXPLETIVE,
    NRType.PREDICATE,
    NRType.QUANTIFIER,
    NRType.COORDINATION,
    NRType.IDIOM,
)


@dataclass
class Document:
    """A tokenized document with gold (or predicted) clusters and non-referring markables.

    Spans are inclusive ``(start, end)`` token offsets over the whole document.
    """

    doc_key: str
    sentences: list[list[str]]
    speakers: Optional[list[list[str]]] = None
    genre: str = ""
    clusters: list[list[Span]] = field(default_factory=list)
    nonreferring: list[tuple[Span, NRType]] = field(default_factory=list)

    def __post_init__(self):
        if self.speakers is None:
            self.speakers = [["-"] * len(s) for s in self.sentences]
        self.clusters = [[tuple(map(int, sp)) for sp in c] for c in self.clusters]
        self.nonreferring = [
            (tuple(map(int, sp)), t if isinstance(t, NRType) else NRType.parse(t))
            for sp, t in self.nonreferring
        ]
        self.validate()

    @property
    def num_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    T = num_tokens

    @property
    def tokens(self) -> list[tuple[str, int, str]]:
        """``(surface, sentence index, speaker)`` per token."""
        out = []
        for k, (sent, spk) in enumerate(zip(self.sentences, self.speakers)):
            out.extend((w, k, s) for w, s in zip(sent, spk))
        return out

    @property
    def words(self) -> list[str]:
        return [w for s in self.sentences for w in s]

    @property
    def sentence_lengths(self) -> list[int]:
        return [len(s) for s in self.sentences]

    @property
    def sentence_map(self) -> list[int]:
        return [k for k, s in enumerate(self.sentences) for _ in s]

    @property
    def token_speakers(self) -> list[str]:
        return [w for s in self.speakers for w in s]

    def mention_to_cluster(self) -> dict[Span, int]:
        return {sp: k for k, c in enumerate(self.clusters) for sp in c}

    def nonreferring_map(self) -> dict[Span, NRType]:
        return dict(self.nonreferring)

    def validate(self) -> None:
        n = self.num_tokens
        if len(self.speakers) != len(self.sentences) or any(
            len(a) != len(b) for a, b in zip(self.speakers, self.sentences)
        ):
            raise CorpusError(f"{self.doc_key}: speakers do not align with sentences")
        for sent in self.sentences:
            for w in sent:
                if len(w) < 1:
                    raise CorpusError(f"{self.doc_key}: empty token")
        seen: dict[Span, int] = {}
        for k, cluster in enumerate(self.clusters):
            if not cluster:
                raise CorpusError(f"{self.doc_key}: cluster {k} is empty")
            for sp in cluster:
                _check_span(self.doc_key, sp, n)
                if sp in seen:
                    raise CorpusError(
                        f"{self.doc_key}: span {sp} appears in clusters {seen[sp]} and {k}"
                    )
                seen[sp] = k
        nr_seen = set()
        for sp, _ in self.nonreferring:
            _check_span(self.doc_key, sp, n)
            if sp in seen:
                raise CorpusError(f"{self.doc_key}: span {sp} is both in a cluster and non-referring")
            if sp in nr_seen:
                raise CorpusError(f"{self.doc_key}: duplicate non-referring span {sp}")
            nr_seen.add(sp)

    def without_singletons_and_nr(self) -> "Document":
        """Copy with singleton clusters and non-referring markables removed."""
        return Document(
            self.doc_key, [list(s) for s in self.sentences], [list(s) for s in self.speakers],
            self.genre, [list(c) for c in self.clusters if len(c) > 1], [],
        )

    def with_annotations(self, clusters: Iterable[Iterable[Span]],
                         nonreferring: Iterable[tuple[Span, NRType]]) -> "Document":
        return Document(
            self.doc_key, [list(s) for s in self.sentences], [list(s) for s in self.speakers],
            self.genre, [sorted(c) for c in clusters], list(nonreferring),
        )

    def split(self, max_tokens: int) -> list["Document"]:
        """Split at sentence boundaries into pieces of at most ``max_tokens`` tokens.

        A single sentence longer than the limit stays whole. Annotations that
        cross a piece boundary are dropped.
        """
        if self.num_tokens <= max_tokens:
            return [self]
        groups: list[list[int]] = [[]]
        size = 0
        for k, sent in enumerate(self.sentences):
            if groups[-1] and size + len(sent) > max_tokens:
                groups.append([])
                size = 0
            groups[-1].append(k)
            size += len(sent)
        pieces = []
        offset = 0
        for part, idxs in enumerate(groups):
            length = sum(len(self.sentences[k]) for k in idxs)
            lo, hi = offset, offset + length - 1

            def inside(sp):
                return lo <= sp[0] and sp[1] <= hi

            clusters = []
            for c in self.clusters:
                kept = [(s - lo, e - lo) for s, e in c if inside((s, e))]
                if kept:
                    clusters.append(kept)
            nr = [((s - lo, e - lo), t) for (s, e), t in self.nonreferring if inside((s, e))]
            pieces.append(Document(
                f"{self.doc_key}@{part}",
                [list(self.sentences[k]) for k in idxs],
                [list(self.speakers[k]) for k in idxs],
                self.genre, clusters, nr,
            ))
            offset += length
        return pieces

    def __eq__(self, other) -> bool:
        if not isinstance(other, Document):
            return NotImplemented
        return (
            self.doc_key == other.doc_key
            and self.genre == other.genre
            and self.sentences == other.sentences
            and self.speakers == other.speakers
            and _canon_clusters(self.clusters) == _canon_clusters(other.clusters)
            and sorted(self.nonreferring) == sorted(other.nonreferring)
        )


def _canon_clusters(clusters):
    return sorted(tuple(sorted(c)) for c in clusters)


def _check_span(doc_key: str, sp: Span, n: int) -> None:
    s, e = sp
    if not (0 <= s <= e < n):
        raise CorpusError(f"{doc_key}: span {sp} outside document of {n} tokens")
