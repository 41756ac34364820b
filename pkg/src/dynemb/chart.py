"""Self-contained SVG line chart of weekly AUC per approach.

Hand-rolled on purpose: the output is plain text with fixed-precision
coordinates, so rendering the same table twice yields identical bytes and
charts can be diffed in tests. One ``<polyline>`` per approach; the y
values are per-week means over seeds.
"""

from __future__ import annotations

from pathlib import Path

from .harness import ResultTable
from .metrics import aggregate

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

_WIDTH, _HEIGHT = 720.0, 400.0
_LEFT, _RIGHT, _TOP, _BOTTOM = 62.0, 150.0, 28.0, 48.0


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int) -> list[float]:
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def render_chart(table: ResultTable, path: str | Path) -> None:
    """Write the weekly AUC chart for ``table`` to ``path``."""
    if not table.rows:
        raise ValueError("cannot chart an empty result table")
    summaries = aggregate(table.rows)
    approaches = sorted(summaries)

    weeks = sorted({week for s in summaries.values() for week in s.weekly_means})
    values = [v for s in summaries.values() for v in s.weekly_means.values()]
    lo, hi = min(values), max(values)
    lo = max(0.0, lo - 0.03)
    hi = min(1.0, hi + 0.03)
    if hi - lo < 0.1:
        mid = (hi + lo) / 2.0
        lo, hi = max(0.0, mid - 0.05), min(1.0, mid + 0.05)
    wk_lo, wk_hi = weeks[0], weeks[-1]
    wk_span = max(1, wk_hi - wk_lo)

    plot_w = _WIDTH - _LEFT - _RIGHT
    plot_h = _HEIGHT - _TOP - _BOTTOM

    def sx(week: float) -> float:
        return _LEFT + (week - wk_lo) / wk_span * plot_w

    def sy(value: float) -> float:
        return _TOP + (hi - value) / (hi - lo) * plot_h

    out: list[str] = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH:.0f}" '
        f'height="{_HEIGHT:.0f}" viewBox="0 0 {_WIDTH:.0f} {_HEIGHT:.0f}" '
        'font-family="sans-serif" font-size="12">',
        f'<rect width="{_WIDTH:.0f}" height="{_HEIGHT:.0f}" fill="white"/>',
        f'<text x="{_LEFT + plot_w / 2:.0f}" y="16" text-anchor="middle" '
        'font-size="14">Mean AUC by training week</text>',
    ]

    # Axes.
    x0, y0 = _fmt(_LEFT), _fmt(_TOP + plot_h)
    x1 = _fmt(_LEFT + plot_w)
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{_fmt(_TOP)}" x2="{x0}" y2="{y0}" stroke="black"/>')

    week_step = max(1, (wk_span + 11) // 12)
    for week in range(wk_lo, wk_hi + 1, week_step):
        x = _fmt(sx(week))
        out.append(f'<line x1="{x}" y1="{y0}" x2="{x}" y2="{_fmt(_TOP + plot_h + 5)}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{_fmt(_TOP + plot_h + 20)}" text-anchor="middle">{week}</text>')
    for tick in _ticks(lo, hi, 6):
        y = _fmt(sy(tick))
        out.append(f'<line x1="{_fmt(_LEFT - 5)}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{_fmt(_LEFT - 9)}" y="{y}" text-anchor="end" dominant-baseline="middle">{tick:.3f}</text>')
    out.append(
        f'<text x="{_LEFT + plot_w / 2:.0f}" y="{_HEIGHT - 10:.0f}" text-anchor="middle">training week</text>'
    )
    out.append(
        f'<text x="16" y="{_TOP + plot_h / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_TOP + plot_h / 2:.0f})">AUC</text>'
    )

    # One polyline per approach, plus a legend entry.
    legend_x = _LEFT + plot_w + 18
    for i, name in enumerate(approaches):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(
            f"{_fmt(sx(week))},{_fmt(sy(value))}"
            for week, value in sorted(summaries[name].weekly_means.items())
        )
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = _TOP + 14 + i * 20
        out.append(
            f'<g class="legend-item">'
            f'<line x1="{_fmt(legend_x)}" y1="{_fmt(ly)}" x2="{_fmt(legend_x + 22)}" y2="{_fmt(ly)}" '
            f'stroke="{color}" stroke-width="2"/>'
            f'<text x="{_fmt(legend_x + 28)}" y="{_fmt(ly + 4)}">{name}</text>'
            f'</g>'
        )

    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
