import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biaffine_lab.data import AnnotatedGraphSample
from biaffine_lab.eval import (
    StatisticsError,
    aggregate_seeds,
    attachment_scores,
    evaluate_predictions,
    micro_f1,
    wilcoxon_bruteforce,
    wilcoxon_one_tailed,
)


def enumeration_p(xs, ys):
    """Independent oracle: average-rank W+ and every sign flip, written out longhand."""
    d = [x - y for x, y in zip(xs, ys) if x != y]
    mags = sorted(abs(v) for v in d)
    rank_of = {}
    i = 0
    while i < len(mags):
        j = i
        while j + 1 < len(mags) and mags[j + 1] == mags[i]:
            j += 1
        rank_of[mags[i]] = (i + 1 + j + 1) / 2
        i = j + 1
    ranks = [rank_of[abs(v)] for v in d]
    observed = sum(r for r, v in zip(ranks, d) if v > 0)
    hits = sum(1 for signs in itertools.product((0, 1), repeat=len(d))
               if sum(r for r, s in zip(ranks, signs) if s) >= observed - 1e-12)
    return hits / 2 ** len(d)


def test_micro_f1_cases():
    assert micro_f1({(1, 0)}, {(1, 0)}) == 1.0
    assert micro_f1({(1, 0)}, {(2, 0)}) == 0.0
    assert micro_f1([], []) == 1.0
    pred = {(1, 0), (2, 1), (3, 1)}
    gold = {(1, 0), (2, 1), (3, 2)}
    assert micro_f1(pred, gold) == pytest.approx(2 / 3, abs=0)


def test_attachment_scores_hand_fixture():
    uas, las = attachment_scores([0, 1, 1, 2], ["root", "a", "b", "x"], [0, 1, 1, 3], ["root", "a", "c", "x"])
    assert (uas, las) == (0.75, 0.5)
    assert attachment_scores([2, 0], ["a", "b"], [2, 0], ["a", "b"]) == (1.0, 1.0)
    with pytest.raises(ValueError):
        attachment_scores([0], ["a"], [0, 1], ["a", "b"])


def test_las_never_exceeds_uas():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 10))
        ph, gh = rng.integers(0, n + 1, n).tolist(), rng.integers(0, n + 1, n).tolist()
        pr, gr = rng.integers(0, 3, n).tolist(), rng.integers(0, 3, n).tolist()
        uas, las = attachment_scores(ph, pr, gh, gr)
        assert 0 <= las <= uas <= 1


def test_evaluate_predictions_labeled_below_unlabeled():
    gold = [AnnotatedGraphSample(["a", "b", "c"], ["X", "Y", "X"], [2, 0, 2], ["l", "root", "m"])]
    pred = [[(2, 1, "l"), (0, 2, "root"), (2, 3, "l")]]
    r = evaluate_predictions(gold, [["X", "Y", "Y"]], pred)
    assert r.uas == 1.0 and r.las == pytest.approx(2 / 3)
    assert r.f1_unlabeled == 1.0 and r.f1_labeled == pytest.approx(2 / 3)
    assert r.f1_tags == pytest.approx(2 / 3)
    assert r.counts["labeled"] == {"tp": 2, "fp": 1, "fn": 1}


def test_evaluate_predictions_ignores_placeholder_edges():
    gold = [AnnotatedGraphSample(["a", "b"], ["E", "E"], [0, 1], ["<none>", "rel"])]
    r = evaluate_predictions(gold, None, [[(0, 1, "<none>"), (1, 2, "rel")]])
    assert r.f1_labeled == 1.0 and math.isnan(r.f1_tags)


def test_wilcoxon_all_positive_five_pairs():
    xs = [0.81, 0.82, 0.83, 0.84, 0.85]
    ys = [0.80, 0.80, 0.80, 0.80, 0.80]
    assert wilcoxon_one_tailed(xs, ys) == 0.03125
    # reversed direction: W+ = 0 and P(W+ >= 0) = 1; the complement of the
    # forward tail is 1 - 1/32
    assert wilcoxon_one_tailed(ys, xs) == 1.0
    assert 1 - wilcoxon_one_tailed(xs, ys) == 1 - 1 / 32
    from scipy.stats import wilcoxon

    assert wilcoxon(ys, xs, alternative="greater").pvalue == pytest.approx(1.0)


def test_wilcoxon_symmetric_alternation_is_near_half():
    ys = np.arange(10.0)
    xs = ys + np.array([1, -1] * 5) * (np.arange(10) + 1)
    p = wilcoxon_one_tailed(xs, ys)
    assert p == enumeration_p(xs, ys)
    assert 0.35 < p < 0.65


def test_wilcoxon_all_zero_differences():
    with pytest.raises(StatisticsError):
        wilcoxon_one_tailed([1.0] * 5, [1.0] * 5)
    with pytest.raises(ValueError):
        wilcoxon_one_tailed([1, 2, 3], [0, 0, 0])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=5, max_size=10))
def test_exact_wilcoxon_matches_enumeration(pairs):
    xs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    if all(x == y for x, y in pairs):
        return
    p = wilcoxon_one_tailed(xs, ys)
    assert p == pytest.approx(enumeration_p(xs, ys), abs=1e-12)
    assert p == pytest.approx(wilcoxon_bruteforce(xs, ys), abs=1e-12)


def test_wilcoxon_large_sample_agrees_with_scipy():
    from scipy.stats import wilcoxon

    rng = np.random.default_rng(5)
    xs = rng.normal(0.3, 1, 40).round(1)
    ys = np.zeros(40)
    ref = wilcoxon(xs, ys, alternative="greater", zero_method="wilcox", correction=False, method="approx").pvalue
    assert wilcoxon_one_tailed(xs, ys) == pytest.approx(ref, rel=1e-9)


def test_aggregate_seeds():
    assert aggregate_seeds([0.5, 0.5, 0.5]).std == 0.0
    a = aggregate_seeds([0.0, 1.0])
    assert (a.mean, a.std) == (0.5, 0.5)
    vals = [0.70, 0.72, 0.74, 0.71, 0.73]
    b = aggregate_seeds(vals, seeds=[1, 2, 3, 4, 5])
    mean = sum(vals) / 5
    assert b.mean == pytest.approx(mean, abs=1e-15)
    assert b.std == pytest.approx(math.sqrt(sum((v - mean) ** 2 for v in vals) / 5), abs=1e-15)
    assert aggregate_seeds(vals, population=False).std == pytest.approx(
        math.sqrt(sum((v - mean) ** 2 for v in vals) / 4), abs=1e-15)
    assert min(vals) <= b.mean <= max(vals)
    with pytest.raises(ValueError):
        aggregate_seeds([1.0])
