"""Ranking metrics: AUC, group-weighted AUC, relative improvement.

AUC follows the pair-counting definition (probability that a random
positive outscores a random negative, ties worth 0.5) computed through
the rank-sum identity. GAUC averages per-group AUCs weighted by group
sample counts; groups containing a single class carry no pairs and are
skipped. Relative improvement is |a - b| / b in percent.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ScoredLabel:
    group: object
    score: float
    label: int


def auc(items: list[ScoredLabel] | None = None, *, scores=None, labels=None) -> float:
    """Pair-counting AUC via average ranks; requires both classes present."""
    if items is not None:
        scores = np.array([i.score for i in items], dtype=np.float64)
        labels = np.array([i.label for i in items])
    else:
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.asarray(labels)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC is undefined without both a positive and a negative")

    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores))
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank of the tie run
        i = j + 1
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class MetricReport:
    auc: float
    gauc: float
    group_rows: list[tuple[object, int, float]] = field(default_factory=list)
    skipped_groups: int = 0
    baseline_name: str | None = None
    baseline_gauc: float | None = None
    relative_improvement_pct: float | None = None

    def to_text(self) -> str:
        lines = [f"auc: {self.auc!r}",
                 f"gauc: {self.gauc!r}",
                 f"groups: {len(self.group_rows)}",
                 f"single_class_groups_skipped: {self.skipped_groups}"]
        if self.baseline_gauc is not None:
            lines.append(f"baseline: {self.baseline_name or 'baseline'}")
            lines.append(f"baseline_gauc: {self.baseline_gauc!r}")
            lines.append(f"relative_improvement_pct: {self.relative_improvement_pct!r}")
        lines.append("")
        lines.append("group\tweight\tauc")
        for group, weight, value in self.group_rows:
            lines.append(f"{group}\t{weight}\t{value!r}")
        return "\n".join(lines) + "\n"


def gauc(items: list[ScoredLabel]) -> float:
    """Sample-count-weighted mean of per-group AUCs."""
    return evaluate(items).gauc


def evaluate(items: list[ScoredLabel], baseline_gauc: float | None = None,
             baseline_name: str | None = None) -> MetricReport:
    groups: dict[object, list[ScoredLabel]] = {}
    for it in items:
        groups.setdefault(it.group, []).append(it)

    rows: list[tuple[object, int, float]] = []
    skipped = 0
    weighted, weight_total = 0.0, 0
    for key in sorted(groups, key=lambda g: str(g)):
        members = groups[key]
        labels = {m.label for m in members}
        if labels != {0, 1}:
            skipped += 1
            continue
        value = auc(members)
        rows.append((key, len(members), value))
        weighted += len(members) * value
        weight_total += len(members)
    if weight_total == 0:
        raise ValueError("no group contains both classes; GAUC is undefined")

    overall = auc(items) if {i.label for i in items} == {0, 1} else float("nan")
    report = MetricReport(auc=overall, gauc=weighted / weight_total, group_rows=rows,
                          skipped_groups=skipped)
    if baseline_gauc is not None:
        report.baseline_name = baseline_name
        report.baseline_gauc = baseline_gauc
        report.relative_improvement_pct = relative_improvement(report.gauc, baseline_gauc)
    return report


def relative_improvement(ours: float, base: float) -> float:
    """|ours - base| / base, in percent."""
    if base <= 0:
        raise ValueError("baseline must be positive")
    return abs(ours - base) / base * 100.0


def kendall_tau(a, b) -> float:
    """Kendall rank correlation with tie adjustment (tau-b), O(n^2)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("kendall_tau needs two equal-length vectors of length >= 2")
    da = np.sign(a[:, None] - a[None, :])
    db = np.sign(b[:, None] - b[None, :])
    upper = np.triu_indices(len(a), k=1)
    concordant = float(np.sum(da[upper] * db[upper]))
    ties_a = float(np.sum(da[upper] == 0))
    ties_b = float(np.sum(db[upper] == 0))
    n_pairs = len(upper[0])
    denom = np.sqrt((n_pairs - ties_a) * (n_pairs - ties_b))
    if denom == 0:
        return 0.0
    return concordant / denom
