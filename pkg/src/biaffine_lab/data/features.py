"""Word-level feature providers.

``trainable`` mode owns an embedding table in the model's ParameterStore.
``frozen`` mode reads a plain-text vector file (first line ``COUNT DIM``, then
``word v1 ... vd`` per line) and never contributes gradients; an optional
``<unk>`` row serves out-of-file words.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ..numerics import ParameterStore, SeededRng
from ..numerics import autograd as ag
from .sample import DataError
from .vocab import UNK, Vocabulary


def read_vector_file(path) -> tuple[dict[str, np.ndarray], int]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}: first line must be 'COUNT DIM'")
        count, dim = int(header[0]), int(header[1])
        table: dict[str, np.ndarray] = {}
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise DataError(f"{path}:{line_no}: expected a word and {dim} values")
            table[parts[0]] = np.array([float(v) for v in parts[1:]])
    if len(table) != count:
        raise DataError(f"{path}: header announces {count} vectors, found {len(table)}")
    return table, dim


def write_vector_file(path, table: dict[str, np.ndarray]) -> None:
    dims = {len(v) for v in table.values()}
    if len(dims) != 1:
        raise DataError("all vectors must share one dimension")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table)} {dims.pop()}\n")
        for word, vec in table.items():
            fh.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")


class FeatureProvider:
    def __init__(self, mode: str, dim: int, vocab: Vocabulary, params: ParameterStore | None = None,
                 rng: SeededRng | None = None, table: dict[str, np.ndarray] | None = None):
        self.mode = mode
        self.dim = dim
        self.vocab = vocab
        self.table = None
        self.path: str | None = None  # vector file a frozen table was read from
        if mode == "trainable":
            if params is None or rng is None:
                raise ValueError("trainable features need a ParameterStore and an rng")
            if "features.embed" not in params:
                params.add("features.embed", rng.normal((len(vocab.words), dim)))
            self.embed = params["features.embed"]
        elif mode == "frozen":
            if table is None:
                raise ValueError("frozen features need a vector table")
            self.table = table
            self.embed = None
        else:
            raise ValueError(f"unknown feature mode {mode!r}")

    @classmethod
    def from_file(cls, path, vocab: Vocabulary) -> "FeatureProvider":
        table, dim = read_vector_file(path)
        provider = cls("frozen", dim, vocab, table=table)
        provider.path = str(path)
        return provider

    def _frozen_row(self, word: str) -> np.ndarray:
        if word in self.table:
            return self.table[word]
        if UNK in self.table:
            return self.table[UNK]
        raise DataError(f"no vector for {word!r} and the vector file has no {UNK} row")

    def lookup(self, words: Sequence[Sequence[str]], word_ids: np.ndarray) -> ag.Var:
        """Features for a padded batch: (B, n_max, dim). Padding rows are arbitrary."""
        if self.mode == "trainable":
            return self.embed[word_ids]
        out = np.zeros(word_ids.shape + (self.dim,))
        for b, sent in enumerate(words):
            for i, w in enumerate(sent):
                out[b, i] = self._frozen_row(w)
        return ag.constant(out)

    def features(self, words: Sequence[str]) -> ag.Var:
        """Feature matrix (n, dim) for one sentence."""
        ids = np.array([self.vocab.words.index(w) for w in words], dtype=np.int64)
        return ag.reshape(self.lookup([words], ids[None, :]), (len(words), self.dim))


def get_features(sample, provider: FeatureProvider) -> ag.Var:
    return provider.features(sample.words)
