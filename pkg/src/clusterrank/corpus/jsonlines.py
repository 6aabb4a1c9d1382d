"""One-document-per-line JSON format carrying singletons and non-referring markables.

Fields: ``doc_key``, ``genre``, ``sentences`` (lists of tokens), ``speakers``
(parallel to sentences), ``clusters`` (lists of ``[start, end]``),
``nonreferring`` (list of ``[start, end, type]``).
"""
from __future__ import annotations

import json
from typing import Iterable, TextIO

from .document import CorpusError, Document, NRType


def document_from_dict(obj: dict) -> Document:
    try:
        sentences = obj["sentences"]
        key = obj["doc_key"]
    except KeyError as exc:
        raise CorpusError(f"missing field {exc.args[0]!r}") from None
    clusters = [[(int(s), int(e)) for s, e in c] for c in obj.get("clusters", [])]
    nonref = []
    for item in obj.get("nonreferring", []):
        if len(item) == 2:
            s, e = item
            t = NRType.NR
        else:
            s, e, t = item
        nonref.append(((int(s), int(e)), NRType.parse(t) if not isinstance(t, NRType) else t))
    return Document(
        doc_key=key,
        sentences=[list(s) for s in sentences],
        speakers=obj.get("speakers"),
        genre=obj.get("genre", ""),
        clusters=clusters,
        nonreferring=nonref,
    )


def document_to_dict(doc: Document) -> dict:
    return {
        "doc_key": doc.doc_key,
        "genre": doc.genre,
        "sentences": doc.sentences,
        "speakers": doc.speakers,
        "clusters": [[[s, e] for s, e in sorted(c)] for c in doc.clusters],
        "nonreferring": [[s, e, t.value] for (s, e), t in sorted(doc.nonreferring)],
    }


def read_extended_json(stream: TextIO) -> list[Document]:
    docs = []
    for lineno, line in enumerate(stream, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        try:
            docs.append(document_from_dict(obj))
        except CorpusError as exc:
            raise CorpusError(f"line {lineno}: {exc}") from None
    return docs


def write_extended_json(docs: Iterable[Document], stream: TextIO) -> None:
    for doc in docs:
        stream.write(json.dumps(document_to_dict(doc), ensure_ascii=False) + "\n")


def read_documents(path: str) -> list[Document]:
    """Read by extension: ``.conll``/``.gold_conll``/``.v4_gold_conll`` or JSON lines."""
    from .conll import read_conll2012

    with open(path, encoding="utf-8") as fh:
        if "conll" in path.rsplit("/", 1)[-1].split(".", 1)[-1]:
            return read_conll2012(fh)
        return read_extended_json(fh)
