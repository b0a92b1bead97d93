"""Seeded random streams.

Draws come from numpy's PCG64 bit generator, whose output sequence for a given
seed is fixed across platforms and numpy releases.
"""

from __future__ import annotations

import numpy as np


class SeededRng:
    algorithm = "PCG64"

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed})"

    def spawn(self, key: int) -> "SeededRng":
        """Independent child stream, deterministic in (seed, key)."""
        mixed = np.random.SeedSequence([self.seed, int(key)]).generate_state(2, dtype=np.uint64)
        return SeededRng(int(mixed[0]))

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def normal(self, size=None, scale: float = 1.0) -> np.ndarray:
        return self.generator.normal(0.0, scale, size=size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        return self.generator.uniform(low, high, size=size)

    def integers(self, low: int, high: int | None = None, size=None):
        return self.generator.integers(low, high, size=size)

    def choice(self, seq, p=None):
        idx = self.generator.choice(len(seq), p=p)
        return seq[idx]
