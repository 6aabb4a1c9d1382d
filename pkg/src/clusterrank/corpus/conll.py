"""CoNLL-2012 column format.

Word is column 4, speaker column 10, coreference the last column. Each
``#begin document (name); part NNN`` block becomes one Document keyed
``name#part``.
"""
from __future__ import annotations

import re
from collections import defaultdict
from typing import Iterable, TextIO

from .document import CorpusError, Document

MIN_COLUMNS = 12
_BEGIN = re.compile(r"^#begin document \(?(.*?)\)?;?\s*(?:part\s+(\d+))?\s*$")
_PART = re.compile(r"^(\(?)(\d+)(\)?)$")


def genre_of(name: str) -> str:
    return name.split("/", 1)[0] if "/" in name else ""


def read_conll2012(stream: TextIO) -> list[Document]:
    docs: list[Document] = []
    state = None
    for lineno, raw in enumerate(stream, 1):
        line = raw.rstrip("\n")
        if line.startswith("#begin document"):
            if state is not None:
                raise CorpusError(f"line {lineno}: nested #begin document in {state.key}")
            m = _BEGIN.match(line.strip())
            if not m:
                raise CorpusError(f"line {lineno}: cannot parse {line!r}")
            name, part = m.group(1), int(m.group(2) or 0)
            state = _DocState(name, part)
            continue
        if line.startswith("#end document"):
            if state is None:
                raise CorpusError(f"line {lineno}: #end document without #begin")
            docs.append(state.finish(lineno))
            state = None
            continue
        if line.startswith("#"):
            continue
        if not line.strip():
            if state is not None:
                state.end_sentence()
            continue
        if state is None:
            raise CorpusError(f"line {lineno}: token line outside a document")
        state.add_token(line.split(), lineno)
    if state is not None:
        raise CorpusError(f"document {state.key} is missing #end document")
    return docs


class _DocState:
    def __init__(self, name: str, part: int):
        self.name = name
        self.part = part
        self.key = f"{name}#{part}"
        self.sentences: list[list[str]] = []
        self.speakers: list[list[str]] = []
        self.current: list[str] = []
        self.current_spk: list[str] = []
        self.n = 0
        self.open: dict[str, list[tuple[int, int]]] = defaultdict(list)
        self.clusters: dict[str, list[tuple[int, int]]] = defaultdict(list)
        self.order: list[str] = []

    def end_sentence(self):
        if self.current:
            self.sentences.append(self.current)
            self.speakers.append(self.current_spk)
            self.current, self.current_spk = [], []

    def _record(self, ent: str, span):
        if ent not in self.clusters:
            self.order.append(ent)
        self.clusters[ent].append(span)

    def add_token(self, cols: list[str], lineno: int):
        if len(cols) < MIN_COLUMNS:
            raise CorpusError(
                f"{self.key}, line {lineno}: expected at least {MIN_COLUMNS} columns, got {len(cols)}"
            )
        t = self.n
        self.current.append(cols[3])
        self.current_spk.append(cols[9])
        self.n += 1
        cell = cols[-1]
        if cell == "-":
            return
        opens, closes = [], []
        for part in cell.split("|"):
            m = _PART.match(part)
            if not m:
                raise CorpusError(f"{self.key}, line {lineno}: bad coreference entry {part!r}")
            left, ent, right = m.groups()
            if left and right:
                self._record(ent, (t, t))
            elif left:
                opens.append(ent)
            elif right:
                closes.append(ent)
            else:
                raise CorpusError(f"{self.key}, line {lineno}: bad coreference entry {part!r}")
        for ent in closes:
            if not self.open[ent]:
                raise CorpusError(
                    f"{self.key}, line {lineno}: entity {ent} closed but never opened"
                )
            start, _ = self.open[ent].pop()
            self._record(ent, (start, t))
        for ent in opens:
            self.open[ent].append((t, lineno))

    def finish(self, lineno: int) -> Document:
        self.end_sentence()
        for ent, stack in self.open.items():
            if stack:
                raise CorpusError(
                    f"{self.key}, line {stack[-1][1]}: entity {ent} opened but never closed"
                )
        clusters = [sorted(self.clusters[e]) for e in self.order]
        return Document(self.key, self.sentences, self.speakers, genre_of(self.name), clusters, [])


def _split_key(doc_key: str) -> tuple[str, int]:
    name, sep, part = doc_key.rpartition("#")
    if sep and part.isdigit():
        return name, int(part)
    return doc_key, 0


def coref_cells(doc: Document) -> list[str]:
    """Coreference column values for every token of ``doc``."""
    n = doc.num_tokens
    opens = [[] for _ in range(n)]
    closes = [[] for _ in range(n)]
    singles = [[] for _ in range(n)]
    for ent, cluster in enumerate(doc.clusters):
        for s, e in cluster:
            if s == e:
                singles[s].append(ent)
            else:
                opens[s].append((e, ent))
                closes[e].append((s, ent))
    cells = []
    for t in range(n):
        parts = [f"{ent})" for _, ent in sorted(closes[t], reverse=True)]
        parts += [f"({ent})" for ent in sorted(singles[t])]
        parts += [f"({ent}" for _, ent in sorted(opens[t], reverse=True)]
        cells.append("|".join(parts) if parts else "-")
    return cells


def write_conll2012(docs: Iterable[Document], stream: TextIO) -> None:
    for doc in docs:
        name, part = _split_key(doc.doc_key)
        stream.write(f"#begin document ({name}); part {part:03d}\n")
        cells = coref_cells(doc)
        t = 0
        for sent, spk in zip(doc.sentences, doc.speakers):
            for k, (word, speaker) in enumerate(zip(sent, spk)):
                cols = [name, str(part), str(k), word, "-", "-", "-", "-", "-", speaker, "*", cells[t]]
                stream.write("\t".join(cols) + "\n")
                t += 1
            stream.write("\n")
        stream.write("#end document\n")
