import numpy as np
import pytest

from coupa.metrics import (MetricReport, ScoredLabel, auc, evaluate, gauc,
                           kendall_tau, relative_improvement)


def brute_force_auc(scores, labels) -> float:
    """Oracle: enumerate every positive-negative pair, ties count 0.5."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def test_auc_simple_case():
    scores, labels = [0.9, 0.4, 0.6], [1, 0, 1]
    assert brute_force_auc(scores, labels) == 1.0
    assert auc(scores=scores, labels=labels) == 1.0


def test_auc_inverted_scores():
    assert auc(scores=[0.1, 0.9, 0.2], labels=[1, 0, 1]) == 0.0


def test_auc_all_ties():
    assert auc(scores=[0.5, 0.5, 0.5, 0.5], labels=[1, 0, 1, 0]) == 0.5


def test_auc_single_class_rejected():
    with pytest.raises(ValueError):
        auc(scores=[0.1, 0.2], labels=[1, 1])
    with pytest.raises(ValueError):
        auc(scores=[0.1, 0.2], labels=[0, 0])


def test_auc_matches_pair_counting_oracle_exhaustively():
    rng = np.random.default_rng(0)
    for trial in range(300):
        n = int(rng.integers(2, 51))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        # coarse grid scores force plenty of ties
        scores = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=n) \
            if trial % 2 else rng.normal(size=n)
        got = auc(scores=scores, labels=labels)
        want = brute_force_auc(list(scores), list(labels))
        assert got == pytest.approx(want, abs=1e-12)


def test_gauc_single_group_equals_auc():
    items = [ScoredLabel("u", s, l) for s, l in [(0.9, 1), (0.3, 0), (0.5, 1), (0.1, 0)]]
    assert gauc(items) == auc(items)


def test_gauc_weighted_mean_arithmetic():
    # group a: 1 positive vs 5 negatives, 4 wins -> AUC 0.8, weight 6
    a = [ScoredLabel("a", 0.5, 1)] + \
        [ScoredLabel("a", s, 0) for s in (0.1, 0.2, 0.3, 0.4, 0.9)]
    # group b: AUC 0.5 by full ties, weight 2
    b = [ScoredLabel("b", 0.7, 1), ScoredLabel("b", 0.7, 0)]
    expected = (6 * 0.8 + 2 * 0.5) / 8
    assert gauc(a + b) == pytest.approx(expected, abs=1e-12)


def test_gauc_lies_between_group_extremes():
    rng = np.random.default_rng(1)
    items = []
    for g in range(6):
        for _ in range(rng.integers(3, 12)):
            items.append(ScoredLabel(g, float(rng.normal()), int(rng.integers(0, 2))))
    report = evaluate(items)
    values = [v for _, _, v in report.group_rows]
    assert min(values) <= report.gauc <= max(values)


def test_gauc_skips_single_class_groups_and_errors_when_none_valid():
    items = [ScoredLabel("a", 0.9, 1), ScoredLabel("a", 0.1, 0),
             ScoredLabel("lonely", 0.5, 1)]
    report = evaluate(items)
    assert report.skipped_groups == 1
    assert report.gauc == 1.0

    with pytest.raises(ValueError):
        gauc([ScoredLabel("a", 0.5, 1), ScoredLabel("b", 0.5, 0)])


def test_relative_improvement_reported_values():
    # published comparison points: 0.7784 vs 0.7701 -> +1.08%, 0.8860 vs 0.8849 -> +0.12%
    assert relative_improvement(0.7784, 0.7701) == pytest.approx(1.08, abs=0.005)
    assert relative_improvement(0.8860, 0.8849) == pytest.approx(0.12, abs=0.005)


def test_relative_improvement_properties():
    assert relative_improvement(0.5, 0.5) == 0.0
    # symmetric through the absolute value
    assert relative_improvement(0.6, 0.8) == pytest.approx(relative_improvement(1.0, 0.8))
    with pytest.raises(ValueError):
        relative_improvement(0.5, 0.0)


def test_report_text_is_deterministic():
    items = [ScoredLabel("u1", 0.9, 1), ScoredLabel("u1", 0.2, 0),
             ScoredLabel("u2", 0.4, 1), ScoredLabel("u2", 0.6, 0)]
    r1 = evaluate(items, baseline_gauc=0.5, baseline_name="coin")
    r2 = evaluate(items, baseline_gauc=0.5, baseline_name="coin")
    assert r1.to_text() == r2.to_text()
    assert "gauc:" in r1.to_text()
    assert "coin" in r1.to_text()


def test_kendall_tau_basics():
    assert kendall_tau([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
    assert kendall_tau([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    x = np.random.default_rng(2).normal(size=30)
    assert kendall_tau(x, x) == pytest.approx(1.0)
