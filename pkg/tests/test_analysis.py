import csv
import json
import math

import numpy as np
import pytest

from biaffine_lab.analysis import (
    RANK_CSV_HEADER,
    VARIANCE_CSV_HEADER,
    RankEntry,
    RankTrace,
    VarianceEntry,
    VarianceTrace,
    check_claim1,
    claim1_traces,
    score_variance,
    track_effective_rank,
    verify_claim1,
    verify_variance_law,
)
from biaffine_lab.model.parser import ScoreSet
from biaffine_lab.numerics import SeededRng, xavier_init


def quarter_circle_rank_fraction():
    """Limit of rho(W)/n for square i.i.d. matrices: singular values follow sqrt(4 - s^2)/pi on [0, 2]."""
    from scipy.integrate import quad

    density = lambda s: math.sqrt(4 - s * s) / math.pi  # noqa: E731
    mu = quad(lambda s: s * density(s), 0, 2)[0]
    h = quad(lambda s: density(s) * (s / mu) * math.log(s / mu), 0, 2)[0]
    return math.exp(-h)


def test_rank_of_xavier_init_is_near_full():
    frac = quarter_circle_rank_fraction()
    assert frac == pytest.approx(0.805, abs=1e-3)
    w = xavier_init((400, 400), rng=SeededRng(0))
    entry = track_effective_rank({"w": w}, 0)
    assert entry.ranks["w"] / 400 == pytest.approx(frac, rel=0.02)
    # rectangular gate matrices (4h x d with d << 4h) sit much closer to full rank
    tall = xavier_init((400, 100), rng=SeededRng(1))
    assert track_effective_rank({"w": tall}, 0).ranks["w"] >= 0.9 * 100


def test_rank_one_planted():
    u = np.arange(1.0, 6.0)
    entry = track_effective_rank({"w": np.outer(u, u[::-1])}, 3)
    assert entry.ranks["w"] == pytest.approx(1.0, abs=1e-9)
    assert entry.mean == pytest.approx(1.0, abs=1e-9)


def test_rank_trace_bookkeeping(tmp_path):
    trace = RankTrace()
    for step in (0, 100, 200):
        trace.append(RankEntry(step, {"a": 2.0, "b": 4.0}))
    assert trace.steps == [0, 100, 200] and trace.means == [3.0, 3.0, 3.0]
    with pytest.raises(ValueError):
        trace.append(RankEntry(200, {}))
    path = trace.write_csv(tmp_path / "rank.csv")
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == RANK_CSV_HEADER and len(rows) == 7


def test_empty_entry_for_model_without_encoder():
    assert math.isnan(RankEntry(0, {}).mean)


def test_score_variance_cases(tmp_path):
    assert score_variance(np.full(5, 3.0)) == (3.0, 0.0)
    assert score_variance(np.array([0.0, 2.0])) == (1.0, 2.0)
    with pytest.raises(ValueError):
        score_variance(np.array([1.0]))
    rng = np.random.default_rng(0)
    edge = rng.normal(size=(6, 6)) * 5
    d = 64
    _, v1 = score_variance(ScoreSet(edge, np.zeros((5, 6, 1)), 1.0))
    _, v2 = score_variance(ScoreSet(edge / math.sqrt(d), np.zeros((5, 6, 1)), 1 / math.sqrt(d)))
    assert v2 / v1 == pytest.approx(1 / d, rel=1e-12)
    trace = VarianceTrace([VarianceEntry(100, 0.125, 0.0, v2)])
    rows = list(csv.reader(open(trace.write_csv(tmp_path / "var.csv"))))
    assert tuple(rows[0]) == VARIANCE_CSV_HEADER


def test_score_variance_respects_mask():
    edge = np.array([[0.0, 0.0, 0.0], [1.0, 3.0, 100.0], [5.0, 7.0, 100.0]])
    mask = np.array([[False] * 3, [True, True, False], [True, True, False]])
    assert score_variance(ScoreSet(edge, np.zeros((2, 3, 1)), 1.0), mask) == score_variance(np.array([1.0, 3, 5, 7]))


def test_variance_law():
    rows = verify_variance_law([1, 64], 100_000, SeededRng(1))
    for row in rows:
        assert row.relative_error < 0.05
        assert row.scaled_relative_error < 0.05
    assert rows[0].variance == pytest.approx(1.0, rel=0.05)


def test_claim1_diagonal_case():
    direct, cyclic = claim1_traces(np.diag([2.0, 1.0]), np.eye(2))
    assert direct.tolist() == pytest.approx([4.0, 5.0], abs=1e-12)
    assert cyclic.tolist() == pytest.approx([4.0, 5.0], abs=1e-12)


def test_claim1_zero_covariance():
    t = check_claim1(np.random.default_rng(0).normal(size=(3, 4)), np.zeros((4, 4)))
    assert t.traces == [0.0, 0.0, 0.0] and t.violations == 0


def test_claim1_random_trials(tmp_path):
    report = verify_claim1(100, 16, SeededRng(2))
    assert report.violation_count == 0
    assert report.max_route_discrepancy <= 1e-9
    assert report.passed
    data = json.loads(report.write_json(tmp_path / "c1.json").read_text())
    assert data["trial_count"] == 100 and data["passed"]


def test_claim1_detects_a_planted_violation():
    # a non-PSD "covariance" can break monotonicity; the checker must notice
    k = -np.eye(2)
    t = check_claim1(np.diag([2.0, 1.0]), k)
    assert t.violations == 1


def test_claim1_traces_match_closed_form():
    # for K = I, tr(A_r A_r^T) is the partial sum of squared singular values
    rng = np.random.default_rng(3)
    a = rng.normal(size=(5, 7))
    sigma = np.linalg.svd(a, compute_uv=False)
    direct, _ = claim1_traces(a, np.eye(7))
    np.testing.assert_allclose(direct, np.cumsum(sigma**2), rtol=1e-12)
