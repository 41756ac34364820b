"""Matplotlib report figures rendered next to the delimited outputs.

The SVG chart in :mod:`dynemb.chart` is the byte-stable artifact; these PNG
figures are the human-friendly companions the CLI drops into the report
directory.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .harness import ResultTable
from .metrics import aggregate


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_weekly_auc(table: ResultTable, path: str | Path) -> None:
    """Line figure of per-week seed-mean AUC for every approach."""
    if not table.rows:
        raise ValueError("cannot plot an empty result table")
    plt = _pyplot()
    summaries = aggregate(table.rows)
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    for name in sorted(summaries):
        weekly = summaries[name].weekly_means
        weeks = sorted(weekly)
        ax.plot(weeks, [weekly[w] for w in weeks], marker="o", markersize=4, label=name)
    ax.set_xlabel("training week")
    ax.set_ylabel("AUC")
    ax.set_title("Mean AUC by training week")
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_new_items(counts: Sequence[int], path: str | Path) -> None:
    """Bar figure of first-appearance item counts per week."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8.0, 4.0))
    ax.bar(range(len(counts)), counts, color="#1f77b4")
    ax.set_xlabel("week")
    ax.set_ylabel("new items")
    ax.set_title("New items per week")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
