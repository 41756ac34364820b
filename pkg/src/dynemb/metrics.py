"""Ranking metrics and result aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class UndefinedAucError(ValueError):
    """AUC is undefined: the evaluation set contains a single class."""


@dataclass(frozen=True)
class WeeklyAuc:
    """One evaluation outcome: approach, training-week index, run seed."""

    approach: str
    week: int
    seed: int
    auc: float


@dataclass
class ApproachSummary:
    mean: float
    std: float
    weekly_means: dict[int, float]


def _tied_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; runs of equal values share the average rank."""
    order = np.argsort(values, kind="mergesort")
    ordered = values[order]
    n = len(values)
    edges = np.flatnonzero(ordered[1:] != ordered[:-1]) + 1
    starts = np.concatenate(([0], edges))
    ends = np.concatenate((edges, [n]))
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat((starts + ends + 1) / 2.0, ends - starts)
    return ranks


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability that a random positive outranks a random negative.

    Ties count one half (the Mann-Whitney convention). Raises
    :class:`UndefinedAucError` when only one class is present, so callers
    decide whether a week is skipped rather than silently scoring 0.5.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-d and the same length")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError(
            f"need both classes, got {n_pos} positives / {n_neg} negatives"
        )
    ranks = _tied_ranks(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def aggregate(rows: Iterable[WeeklyAuc]) -> dict[str, ApproachSummary]:
    """Per-approach mean and sample standard deviation over weeks.

    Seeds are averaged within each week first; the spread reported is the
    n-1 standard deviation across the per-week means (0.0 with one week).
    The per-week means are kept for plotting.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to aggregate")
    by_approach: dict[str, dict[int, list[float]]] = {}
    for row in rows:
        by_approach.setdefault(row.approach, {}).setdefault(row.week, []).append(row.auc)

    out: dict[str, ApproachSummary] = {}
    for approach in sorted(by_approach):
        weeks = by_approach[approach]
        weekly = {week: float(np.mean(weeks[week])) for week in sorted(weeks)}
        values = np.array(list(weekly.values()))
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        out[approach] = ApproachSummary(float(values.mean()), std, weekly)
    return out


def new_items_per_week(weeks: Iterable) -> list[int]:
    """Count of items making their first appearance in each week.

    Accepts :class:`~dynemb.data.WeekSegment` values or plain per-week token
    iterables. Week 0 reports its full distinct item count.
    """
    counts: list[int] = []
    seen: set[str] = set()
    for week in weeks:
        items = week.item_set() if hasattr(week, "item_set") else set(week)
        fresh = items - seen
        counts.append(len(fresh))
        seen |= fresh
    return counts
