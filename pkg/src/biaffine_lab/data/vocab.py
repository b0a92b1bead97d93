from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .sample import AnnotatedGraphSample, DataError

UNK = "<unk>"


class Index:
    """Dense string <-> int map with a fixed, sorted order."""

    def __init__(self, items: Iterable[str], unk: str | None = None):
        ordered = sorted(set(items) - ({unk} if unk else set()))
        self.unk = unk
        self.itos: list[str] = ([unk] if unk else []) + ordered
        self.stoi = {s: i for i, s in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, item: str) -> bool:
        return item in self.stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Index) and self.itos == other.itos and self.unk == other.unk

    def index(self, item: str) -> int:
        if item in self.stoi:
            return self.stoi[item]
        if self.unk is None:
            raise KeyError(f"{item!r} not in index and no UNK entry")
        return self.stoi[self.unk]

    def lookup(self, i: int) -> str:
        return self.itos[i]

    def encode(self, items: Sequence[str]) -> list[int]:
        return [self.index(s) for s in items]


@dataclass(eq=True)
class Vocabulary:
    words: Index
    tags: Index
    relations: Index

    def to_dict(self) -> dict:
        return {"words": self.words.itos, "tags": self.tags.itos, "relations": self.relations.itos}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        words = Index(d["words"], unk=UNK)
        if words.itos != list(d["words"]):
            raise DataError("stored word vocabulary is not in canonical order")
        return cls(words, Index(d["tags"]), Index(d["relations"]))


def build_vocabulary(samples: Sequence[AnnotatedGraphSample]) -> Vocabulary:
    """Vocabulary from the training split only; indices follow sorted order."""
    if not samples:
        raise DataError("cannot build a vocabulary from an empty split")
    words, tags, rels = set(), set(), set()
    for s in samples:
        words.update(s.words)
        tags.update(s.tags)
        rels.update(s.relations)
        rels.update(r for _, _, r in s.extra_edges)
    return Vocabulary(Index(words, unk=UNK), Index(tags), Index(rels))
