"""Metrics, seed aggregation and the one-tailed Wilcoxon signed-rank test."""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .data.sample import NO_EDGE, AnnotatedGraphSample

EXACT_MAX_N = 20


class StatisticsError(ValueError):
    pass


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def add(self, pred: set, gold: set) -> None:
        tp = len(pred & gold)
        self.tp += tp
        self.fp += len(pred) - tp
        self.fn += len(gold) - tp

    @property
    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 1.0 if denom == 0 else 2 * self.tp / denom


def micro_f1(pred_items: Iterable, gold_items: Iterable) -> float:
    """F1 = 2TP / (2TP + FP + FN) over item sets; two empty sets score 1."""
    c = Counts()
    c.add(set(pred_items), set(gold_items))
    return c.f1


def attachment_scores(pred_heads: Sequence[int], pred_rels: Sequence, gold_heads: Sequence[int],
                      gold_rels: Sequence) -> tuple[float, float]:
    if not (len(pred_heads) == len(pred_rels) == len(gold_heads) == len(gold_rels)):
        raise ValueError("prediction and gold differ in length")
    n = len(gold_heads)
    if n == 0:
        return 1.0, 1.0
    head_ok = [p == g for p, g in zip(pred_heads, gold_heads)]
    uas = sum(head_ok) / n
    las = sum(ok and pr == gr for ok, pr, gr in zip(head_ok, pred_rels, gold_rels)) / n
    return uas, las


@dataclass
class MetricsReport:
    f1_tags: float
    f1_unlabeled: float
    f1_labeled: float
    uas: float
    las: float
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    samples: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def metrics(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("f1_tags", "f1_unlabeled", "f1_labeled", "uas", "las")}


def evaluate_predictions(gold: Sequence[AnnotatedGraphSample], pred_tags: Sequence[Sequence[str]] | None,
                         pred_edges: Sequence[Sequence[tuple[int, int, str]]]) -> MetricsReport:
    """Score predicted structures (label strings) against gold samples.

    ``pred_edges[k]`` holds (head, dependent, relation) triples; for tree
    decodes it is one triple per word. UAS/LAS use the first predicted head
    per word against each word's primary gold head.
    """
    if len(gold) != len(pred_edges):
        raise ValueError("prediction and gold differ in sentence count")
    tag_c, unl_c, lab_c = Counts(), Counts(), Counts()
    correct_heads = correct_labeled = words = 0
    for k, sample in enumerate(gold):
        if pred_tags is not None:
            if len(pred_tags[k]) != len(sample):
                raise ValueError(f"sentence {k}: tag count mismatch")
            tag_c.add(set(enumerate(pred_tags[k])), set(enumerate(sample.tags)))
        gold_edges = {(d, h, r) for h, d, r in sample.edges()}
        predicted = {(d, h, r) for h, d, r in pred_edges[k] if r != NO_EDGE}
        unl_c.add({(d, h) for d, h, _ in predicted}, {(d, h) for d, h, _ in gold_edges})
        lab_c.add(predicted, gold_edges)
        first = {}
        for h, d, r in pred_edges[k]:
            first.setdefault(d, (h, r))
        for d, (gh, gr) in enumerate(zip(sample.heads, sample.relations), start=1):
            ph, pr = first.get(d, (-1, None))
            if ph == gh:
                correct_heads += 1
                correct_labeled += pr == gr
        words += len(sample)
    counts = {name: asdict(c) for name, c in (("tags", tag_c), ("unlabeled", unl_c), ("labeled", lab_c))}
    return MetricsReport(
        f1_tags=tag_c.f1 if pred_tags is not None else float("nan"),
        f1_unlabeled=unl_c.f1,
        f1_labeled=lab_c.f1,
        uas=correct_heads / words if words else 1.0,
        las=correct_labeled / words if words else 1.0,
        counts=counts,
        samples=len(gold),
    )


def _signed_ranks(xs, ys) -> np.ndarray:
    d = np.asarray(xs, dtype=np.float64) - np.asarray(ys, dtype=np.float64)
    d = d[d != 0]
    if d.size == 0:
        raise StatisticsError("all paired differences are zero; the test is undefined")
    ranks = stats.rankdata(np.abs(d))
    return np.sign(d) * ranks


def _exact_upper_tail(ranks: np.ndarray, w_plus: float) -> float:
    """P(W+ >= w_plus) under random signs, by dynamic programming over doubled (integer) ranks."""
    doubled = np.rint(2 * ranks).astype(np.int64)
    total = int(doubled.sum())
    dist = np.zeros(total + 1)
    dist[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(dist)
        shifted[r:] = dist[: total + 1 - r]
        dist = 0.5 * (dist + shifted)
    target = int(round(2 * w_plus))
    return float(dist[target:].sum())


def wilcoxon_one_tailed(xs: Sequence[float], ys: Sequence[float]) -> float:
    """p-value for the alternative xs > ys.

    Zero differences are dropped and tied magnitudes share average ranks.
    Up to 20 non-zero pairs the null distribution is enumerated exactly;
    beyond that a tie-corrected normal approximation is used.
    """
    if len(xs) != len(ys):
        raise ValueError("paired samples must have equal length")
    if len(xs) < 5:
        raise ValueError("need at least 5 pairs")
    signed = _signed_ranks(xs, ys)
    ranks = np.abs(signed)
    w_plus = float(ranks[signed > 0].sum())
    n = len(ranks)
    if n <= EXACT_MAX_N:
        return _exact_upper_tail(ranks, w_plus)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    z = (w_plus - mean) / math.sqrt(var)
    return float(stats.norm.sf(z))


def wilcoxon_bruteforce(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Reference p-value by listing all 2^n sign patterns; only for small n."""
    signed = _signed_ranks(xs, ys)
    ranks = np.abs(signed)
    observed = ranks[signed > 0].sum()
    hits = 0
    patterns = list(itertools.product((0, 1), repeat=len(ranks)))
    for signs in patterns:
        if np.dot(signs, ranks) >= observed - 1e-9:
            hits += 1
    return hits / len(patterns)


@dataclass
class SeedAggregate:
    seeds: list[int]
    values: list[float]
    mean: float
    std: float
    population: bool = True

    def __str__(self) -> str:
        return f"{self.mean:.4f} ± {self.std:.4f}"


def aggregate_seeds(values: Sequence[float], seeds: Sequence[int] | None = None,
                    population: bool = True) -> SeedAggregate:
    if len(values) < 2:
        raise ValueError("need at least two seeds to aggregate")
    seeds = list(range(len(values))) if seeds is None else list(seeds)
    if len(seeds) != len(values):
        raise ValueError("one seed per value expected")
    arr = np.asarray(values, dtype=np.float64)
    return SeedAggregate(seeds, arr.tolist(), float(arr.mean()), float(arr.std(ddof=0 if population else 1)),
                         population)
