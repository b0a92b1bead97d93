from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..numerics import SeededRng
from .sample import AnnotatedGraphSample
from .vocab import Vocabulary


@dataclass
class Batch:
    """Padded arrays for up to B sentences. Unknown gold labels are encoded as -1."""

    samples: list[AnnotatedGraphSample]
    word_ids: np.ndarray  # (B, n_max)
    tags: np.ndarray
    heads: np.ndarray
    relations: np.ndarray
    mask: np.ndarray  # (B, n_max) True on real words

    @property
    def size(self) -> int:
        return len(self.samples)

    @property
    def lengths(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    @property
    def words(self) -> list[list[str]]:
        return [s.words for s in self.samples]

    def padded(self, extra: int) -> "Batch":
        """Same batch with ``extra`` more padding columns; used to test mask handling."""

        def pad(a, fill):
            return np.concatenate([a, np.full((a.shape[0], extra), fill, dtype=a.dtype)], axis=1)

        return Batch(self.samples, pad(self.word_ids, 0), pad(self.tags, 0), pad(self.heads, 0),
                     pad(self.relations, 0), pad(self.mask, False))


def _encode(index, items) -> list[int]:
    return [index.stoi.get(x, -1) for x in items]


def collate(samples: Sequence[AnnotatedGraphSample], vocab: Vocabulary, min_length: int = 1) -> Batch:
    bsz = len(samples)
    n_max = max([len(s) for s in samples] + [min_length])
    word_ids = np.zeros((bsz, n_max), dtype=np.int64)
    tags = np.zeros((bsz, n_max), dtype=np.int64)
    heads = np.zeros((bsz, n_max), dtype=np.int64)
    rels = np.zeros((bsz, n_max), dtype=np.int64)
    mask = np.zeros((bsz, n_max), dtype=bool)
    for b, s in enumerate(samples):
        n = len(s)
        word_ids[b, :n] = vocab.words.encode(s.words)
        tags[b, :n] = _encode(vocab.tags, s.tags)
        heads[b, :n] = s.heads
        rels[b, :n] = _encode(vocab.relations, s.relations)
        mask[b, :n] = True
    return Batch(list(samples), word_ids, tags, heads, rels, mask)


def make_batches(samples: Sequence[AnnotatedGraphSample], vocab: Vocabulary, batch_size: int = 8,
                 rng: SeededRng | None = None) -> list[Batch]:
    """Split into batches; shuffled with ``rng`` when given, else in corpus order."""
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    order = rng.permutation(len(samples)) if rng is not None else np.arange(len(samples))
    return [collate([samples[i] for i in order[k:k + batch_size]], vocab)
            for k in range(0, len(samples), batch_size)]
