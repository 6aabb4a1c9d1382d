"""Toy corpus of name/pronoun chains, expletive "it", predicatives and singleton objects.

Run ``python -m clusterrank.synthetic OUT.jsonl [--docs N] [--seed S]`` to
write one in the one-document-per-line format.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .corpus import Document, NRType, write_extended_json

MALE = ("John", "Peter", "David", "Tom", "Mark", "Paul")
FEMALE = ("Mary", "Anna", "Susan", "Kate", "Emma", "Lucy")
VERBS = ("arrived", "smiled", "waved", "left", "laughed", "slept")
OBJECTS = (("a", "dog"), ("the", "car"), ("a", "book"), ("the", "river"))
ROLES = (("a", "teacher"), ("a", "doctor"), ("a", "pilot"))
WEATHER = (("rained",), ("is", "late"), ("snowed",))


def synthetic_document(rng: np.random.Generator, doc_key: str, num_sentences: int = 7) -> Document:
    people = {"m": str(rng.choice(MALE)), "f": str(rng.choice(FEMALE))}
    pronoun = {"m": "He", "f": "She"}
    sentences: list[list[str]] = []
    chains: dict[str, list] = {"m": [], "f": []}
    singletons: list = []
    nonref: list = []
    t = 0

    def add(words):
        nonlocal t
        sentences.append(list(words) + ["."])
        start = t
        t += len(words) + 1
        return start

    # introduce both people, then mix continuations
    for g in rng.permutation(["m", "f"]):
        s = add([people[g], str(rng.choice(VERBS))])
        chains[g].append((s, s))
    kinds = ["pron", "pron", "expl", "obj", "pred", "pron", "expl"]
    rng.shuffle(kinds)
    for kind in kinds[: max(0, num_sentences - 2)]:
        g = str(rng.choice(["m", "f"]))
        if kind == "pron":
            s = add([pronoun[g], str(rng.choice(VERBS))])
            chains[g].append((s, s))
        elif kind == "expl":
            s = add(["It", *WEATHER[rng.integers(len(WEATHER))]])
            nonref.append(((s, s), NRType.EXPLETIVE))
        elif kind == "obj":
            det, noun = OBJECTS[rng.integers(len(OBJECTS))]
            s = add([pronoun[g], "saw", det, noun])
            chains[g].append((s, s))
            singletons.append([(s + 2, s + 3)])
        else:
            det, noun = ROLES[rng.integers(len(ROLES))]
            s = add([people[g], "is", det, noun])
            chains[g].append((s, s))
            nonref.append(((s + 2, s + 3), NRType.PREDICATE))
    clusters = [c for c in chains.values() if c] + singletons
    speakers = [["-"] * len(s) for s in sentences]
    return Document(doc_key, sentences, speakers, "nw", clusters, nonref)


def synthetic_corpus(num_docs: int = 10, seed: int = 0, prefix: str = "synth") -> list[Document]:
    rng = np.random.default_rng(seed)
    return [synthetic_document(rng, f"{prefix}/{k:03d}") for k in range(num_docs)]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("output")
    ap.add_argument("--docs", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--prefix", default="synth")
    args = ap.parse_args(argv)
    docs = synthetic_corpus(args.docs, args.seed, args.prefix)
    with open(args.output, "w", encoding="utf-8") as fh:
        write_extended_json(docs, fh)
    return 0


if __name__ == "__main__":
    sys.exit(main())
