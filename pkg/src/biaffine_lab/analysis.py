"""Effective-rank and score-variance traces, plus numerical checks of the variance law and of trace monotonicity.

Trace monotonicity ("claim1" in the verify suites): for a PSD input
covariance K and the rank-r truncation A_r of A, tr(A_r K A_r^T) is
non-decreasing in r.
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .numerics import SeededRng, effective_rank, svd

CLAIM1_RTOL = 1e-9
RANK_CSV_HEADER = ("step", "matrix_name", "effective_rank")
VARIANCE_CSV_HEADER = ("step", "scaling", "score_mean", "score_variance")
RANK_MATRICES = "parser BiLSTM gate matrices (input-to-hidden W and hidden-to-hidden U, both directions, all layers)"


# effective rank


@dataclass
class RankEntry:
    step: int
    ranks: dict[str, float]

    @property
    def mean(self) -> float:
        return float(np.mean(list(self.ranks.values()))) if self.ranks else float("nan")


@dataclass
class RankTrace:
    entries: list[RankEntry] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def append(self, entry: RankEntry) -> None:
        if self.entries and entry.step <= self.entries[-1].step:
            raise ValueError("rank trace steps must be strictly increasing")
        self.entries.append(entry)

    @property
    def steps(self) -> list[int]:
        return [e.step for e in self.entries]

    @property
    def means(self) -> list[float]:
        return [e.mean for e in self.entries]

    def rows(self):
        for e in self.entries:
            for name, rho in e.ranks.items():
                yield e.step, name, rho

    def write_csv(self, path) -> Path:
        return _write_csv(path, RANK_CSV_HEADER, self.rows())


def track_effective_rank(weights, step: int) -> RankEntry:
    """Effective rank of every parser BiLSTM gate matrix.

    ``weights`` is a model exposing ``parser_weight_matrices()`` or a mapping
    of name to 2-D array. A model without a parser BiLSTM yields an empty entry.
    """
    if hasattr(weights, "parser_weight_matrices"):
        weights = weights.parser_weight_matrices() if weights.config.parser_layers > 0 else {}
    return RankEntry(step, {name: effective_rank(w) for name, w in weights.items()})


# score variance


@dataclass
class VarianceEntry:
    step: int
    scaling: float
    mean: float
    variance: float


@dataclass
class VarianceTrace:
    entries: list[VarianceEntry] = field(default_factory=list)

    def append(self, entry: VarianceEntry) -> None:
        self.entries.append(entry)

    def rows(self):
        for e in self.entries:
            yield e.step, e.scaling, e.mean, e.variance

    def write_csv(self, path) -> Path:
        return _write_csv(path, VARIANCE_CSV_HEADER, self.rows())


def score_variance(scores, mask: np.ndarray | None = None) -> tuple[float, float]:
    """Mean and unbiased variance of the unmasked edge scores.

    ``scores`` is a ScoreSet (word rows of its edge matrix are used) or an array.
    """
    if hasattr(scores, "edge"):
        values = np.asarray(scores.edge)[1:]
        if mask is not None:
            mask = np.asarray(mask)[1:] if mask.shape == scores.edge.shape else mask
    else:
        values = np.asarray(scores, dtype=np.float64)
    values = values[mask] if mask is not None else values.ravel()
    if values.size < 2:
        raise ValueError("need at least two unmasked scores")
    return float(values.mean()), float(values.var(ddof=1))


def batch_score_variance(edge: np.ndarray, token_mask: np.ndarray) -> tuple[float, float]:
    """Pooled statistics over a padded (B, n+1, n+1) edge tensor: word rows x real columns."""
    word_rows = token_mask.copy()
    word_rows[:, 0] = False
    pair = word_rows[:, :, None] & token_mask[:, None, :]
    return score_variance(edge, pair)


# the variance law


@dataclass
class VarianceLawRow:
    d: int
    samples: int
    variance: float
    ratio: float
    scaled_variance: float

    @property
    def relative_error(self) -> float:
        return abs(self.ratio - 1.0)

    @property
    def scaled_relative_error(self) -> float:
        return abs(self.scaled_variance - 1.0)


def verify_variance_law(d_values, n_samples: int = 100_000, rng: SeededRng | None = None,
                        chunk: int = 10_000) -> list[VarianceLawRow]:
    """Empirical Var(q.k) for standard-normal q, k of width d, raw and after 1/sqrt(d) scaling."""
    if n_samples < 2:
        raise ValueError("need at least two samples")
    rng = rng or SeededRng(0)
    out = []
    for d in d_values:
        if d < 1:
            raise ValueError("dimensions must be positive")
        dots = np.empty(n_samples)
        for start in range(0, n_samples, chunk):
            m = min(chunk, n_samples - start)
            q = rng.generator.standard_normal((m, d))
            k = rng.generator.standard_normal((m, d))
            dots[start : start + m] = np.einsum("ij,ij->i", q, k)
        var = float(dots.var(ddof=1))
        scaled = float((dots / math.sqrt(d)).var(ddof=1))
        out.append(VarianceLawRow(int(d), n_samples, var, var / d, scaled))
    return out


# trace monotonicity of truncated projections


def claim1_traces(a: np.ndarray, k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """tr(Cov(Y_r)) for r = 1..min(m, n), computed directly and by the cyclic identity.

    Direct: tr(A_r K A_r^T). Cyclic: tr(K A_r^T A_r).
    """
    a = np.asarray(a, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    dec = svd(a)
    direct, cyclic = [], []
    for r in range(1, min(a.shape) + 1):
        a_r = dec.reconstruct(r)
        direct.append(np.trace(a_r @ k @ a_r.T))
        cyclic.append(np.trace(k @ (a_r.T @ a_r)))
    return np.array(direct), np.array(cyclic)


def _rel_gap(x: float, y: float) -> float:
    scale = max(abs(x), abs(y))
    return 0.0 if scale == 0 else abs(x - y) / scale


@dataclass
class Claim1Trial:
    shape: tuple[int, int]
    traces: list[float]
    traces_cyclic: list[float]
    violations: int
    max_violation: float
    route_discrepancy: float


@dataclass
class Claim1Report:
    trials: list[Claim1Trial]
    rtol: float = CLAIM1_RTOL

    @property
    def violation_count(self) -> int:
        return sum(t.violations for t in self.trials)

    @property
    def max_violation(self) -> float:
        return max((t.max_violation for t in self.trials), default=0.0)

    @property
    def max_route_discrepancy(self) -> float:
        return max((t.route_discrepancy for t in self.trials), default=0.0)

    @property
    def passed(self) -> bool:
        return bool(self.violation_count == 0 and self.max_route_discrepancy <= self.rtol)

    def to_dict(self) -> dict:
        return {
            "trial_count": len(self.trials),
            "rtol": self.rtol,
            "violation_count": self.violation_count,
            "max_violation": self.max_violation,
            "max_route_discrepancy": self.max_route_discrepancy,
            "passed": self.passed,
            "trials": [asdict(t) for t in self.trials],
        }

    def write_json(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path


def check_claim1(a: np.ndarray, k: np.ndarray, rtol: float = CLAIM1_RTOL) -> Claim1Trial:
    direct, cyclic = claim1_traces(a, k)
    violations, worst = 0, 0.0
    for prev, cur in zip(direct[:-1], direct[1:]):
        drop = prev - cur
        if drop > rtol * max(abs(prev), abs(cur)):
            violations += 1
            worst = max(worst, drop)
    gap = max((_rel_gap(x, y) for x, y in zip(direct, cyclic)), default=0.0)
    return Claim1Trial(tuple(np.shape(a)), direct.tolist(), cyclic.tolist(), violations, worst, gap)


def verify_claim1(trials: int = 100, max_dim: int = 16, rng: SeededRng | None = None,
                  rtol: float = CLAIM1_RTOL) -> Claim1Report:
    """Random A (m x n) and PSD K = G G^T per trial; checks the full r-sweep."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if max_dim < 1:
        raise ValueError("max_dim must be >= 1")
    rng = rng or SeededRng(0)
    out = []
    for _ in range(trials):
        m = int(rng.integers(1, max_dim + 1))
        n = int(rng.integers(1, max_dim + 1))
        a = rng.normal((m, n))
        g = rng.normal((n, int(rng.integers(1, max_dim + 1))))
        out.append(check_claim1(a, g @ g.T, rtol))
    return Claim1Report(out, rtol)


def _write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return path


def mean_rank_by_step(trace: RankTrace) -> Mapping[int, float]:
    return {e.step: e.mean for e in trace.entries}
