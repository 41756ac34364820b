"""Clickstream ingestion, weekly partitioning, and synthetic data.

Input follows the YooChoose CSV conventions: a clicks file with
``session,timestamp,item,category`` rows and a buys file with
``session,timestamp,item,price,quantity`` rows, no header, ISO-8601 UTC
timestamps like ``2014-04-07T10:51:09.277Z``. The synthetic generator emits
the same shapes so both paths share one pipeline.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .model import sigmoid
from .seeding import subseed
from .vocab import UNK

logger = logging.getLogger(__name__)

WEEK = timedelta(days=7)
MAX_SESSION_LENGTH = 50
MALFORMED_FRACTION_LIMIT = 0.01

# Anchor instant for generated timestamps; any fixed UTC instant works.
SYNTH_EPOCH = datetime(2014, 4, 6, tzinfo=timezone.utc)


class ClickLogError(ValueError):
    """Unreadable or unacceptably malformed click/buy log."""


@dataclass(frozen=True)
class ClickEvent:
    session_id: str
    timestamp: datetime
    item: str
    category: Optional[str] = None


@dataclass
class Session:
    session_id: str
    items: tuple[str, ...]
    label: int
    start: datetime


@dataclass
class WeekSegment:
    """Half-open 7-day window [start, end) with the sessions starting in it."""

    index: int
    start: datetime
    end: datetime
    sessions: list[Session] = field(default_factory=list)
    categories: dict[str, str] = field(default_factory=dict)
    partial: bool = False

    def item_set(self) -> set[str]:
        out: set[str] = set()
        for session in self.sessions:
            out.update(session.items)
        return out

    def labels(self) -> list[int]:
        return [s.label for s in self.sessions]


def _parse_timestamp(raw: str) -> datetime:
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_clicks(lines: Iterable[str]) -> tuple[list[ClickEvent], list[tuple[int, str]]]:
    """Parse click rows; malformed lines are collected, not fatal."""
    events: list[ClickEvent] = []
    malformed: list[tuple[int, str]] = []
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row:
            continue
        if len(row) != 4:
            malformed.append((lineno, f"expected 4 fields, got {len(row)}"))
            continue
        session_id, raw_ts, item, category = (f.strip() for f in row)
        if not session_id:
            malformed.append((lineno, "empty session id"))
            continue
        if not item:
            malformed.append((lineno, "empty item id"))
            continue
        if item == UNK:
            malformed.append((lineno, f"reserved token {UNK!r} used as item id"))
            continue
        try:
            ts = _parse_timestamp(raw_ts)
        except ValueError:
            malformed.append((lineno, f"bad timestamp {raw_ts!r}"))
            continue
        events.append(ClickEvent(session_id, ts, item, category or None))
    return events, malformed


def parse_buys(lines: Iterable[str]) -> tuple[set[str], list[tuple[int, str]]]:
    """Parse buy rows; only the session id column is consumed."""
    ids: set[str] = set()
    malformed: list[tuple[int, str]] = []
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row:
            continue
        if len(row) != 5:
            malformed.append((lineno, f"expected 5 fields, got {len(row)}"))
            continue
        session_id = row[0].strip()
        if not session_id:
            malformed.append((lineno, "empty session id"))
            continue
        ids.add(session_id)
    return ids, malformed


def _apply_malformed_policy(path, total: int, malformed: list[tuple[int, str]]) -> None:
    if not malformed:
        return
    preview = "; ".join(f"line {n}: {why}" for n, why in malformed[:5])
    if total > 0 and len(malformed) / total > MALFORMED_FRACTION_LIMIT:
        raise ClickLogError(
            f"{path}: {len(malformed)} of {total} lines malformed "
            f"(over {MALFORMED_FRACTION_LIMIT:.0%}): {preview}"
        )
    logger.warning("%s: %d malformed lines ignored (%s)", path, len(malformed), preview)


def load_clicks(path: str | Path) -> list[ClickEvent]:
    """Load a clicks file, warning on malformed lines, failing past 1%."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as handle:
            events, malformed = parse_clicks(handle)
    except OSError as exc:
        raise ClickLogError(f"cannot read clicks file {path}: {exc}") from exc
    _apply_malformed_policy(path, len(events) + len(malformed), malformed)
    if not events and not malformed:
        logger.warning("%s: empty clicks file", path)
    return events


def load_buys(path: str | Path) -> set[str]:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as handle:
            ids, malformed = parse_buys(handle)
    except OSError as exc:
        raise ClickLogError(f"cannot read buys file {path}: {exc}") from exc
    _apply_malformed_policy(path, len(ids) + len(malformed), malformed)
    return ids


def collect_categories(clicks: Iterable[ClickEvent]) -> dict[str, str]:
    """Item to category map, first observation wins."""
    out: dict[str, str] = {}
    for event in clicks:
        if event.category is not None and event.item not in out:
            out[event.item] = event.category
    return out


def assemble_sessions(
    clicks: Sequence[ClickEvent],
    buy_sessions: Iterable[str],
) -> list[Session]:
    """Group clicks into labeled sessions ordered by first-event time.

    Clicks within a session are sorted by timestamp (stable, so file order
    breaks ties). A session is positive when its id appears in the buys set;
    buy ids with no clicks are ignored with a warning.
    """
    buy_sessions = set(buy_sessions)
    grouped: dict[str, list[ClickEvent]] = {}
    for event in clicks:
        grouped.setdefault(event.session_id, []).append(event)

    orphans = buy_sessions - grouped.keys()
    if orphans:
        logger.warning("%d buy sessions have no clicks and are ignored", len(orphans))

    sessions = []
    for sid, events in grouped.items():
        ordered = sorted(events, key=lambda e: e.timestamp)
        sessions.append(
            Session(
                session_id=sid,
                items=tuple(e.item for e in ordered),
                label=1 if sid in buy_sessions else 0,
                start=ordered[0].timestamp,
            )
        )
    sessions.sort(key=lambda s: s.start)
    return sessions


def partition_weeks(
    sessions: Sequence[Session],
    categories: Optional[Mapping[str, str]] = None,
) -> list[WeekSegment]:
    """Split sessions into consecutive 7-day windows.

    Windows are half-open [start, start+7d) anchored at the earliest
    session's first event; a session belongs to the window containing that
    event. Weeks with no sessions still appear, so indices stay contiguous.
    The trailing window is flagged partial: its nominal span extends past
    the last observed session.
    """
    if not sessions:
        raise ValueError("no sessions to partition")
    anchor = min(s.start for s in sessions)
    categories = dict(categories or {})

    buckets: dict[int, list[Session]] = {}
    for session in sessions:
        buckets.setdefault((session.start - anchor) // WEEK, []).append(session)

    segments = []
    for index in range(max(buckets) + 1):
        start = anchor + index * WEEK
        members = sorted(buckets.get(index, []), key=lambda s: s.start)
        items = {item for s in members for item in s.items}
        segments.append(
            WeekSegment(
                index=index,
                start=start,
                end=start + WEEK,
                sessions=members,
                categories={i: categories[i] for i in items if i in categories},
            )
        )
    segments[-1].partial = True
    return segments


@dataclass
class SyntheticConfig:
    """Knobs for the synthetic clickstream generator.

    ``new_items_per_week`` items join the catalog each week after the
    first; every new item is guaranteed to appear in its debut week, so the
    generator's churn schedule is exactly recoverable from the output.
    """

    weeks: int = 8
    initial_catalog: int = 200
    new_items_per_week: int = 20
    sessions_per_week: int = 500
    session_length: float = 8.0
    categories: int = 10
    label_sharpness: float = 2.0
    seed: int = 0

    def validate(self) -> None:
        problems = []
        if self.weeks < 1:
            problems.append("weeks must be >= 1")
        if self.initial_catalog < 1:
            problems.append("initial_catalog must be >= 1")
        if self.new_items_per_week < 0:
            problems.append("new_items_per_week must be >= 0")
        if self.sessions_per_week < 1:
            problems.append("sessions_per_week must be >= 1")
        if self.session_length < 1:
            problems.append("session_length must be >= 1")
        if self.categories < 1:
            problems.append("categories must be >= 1")
        if not self.label_sharpness > 0:
            problems.append("label_sharpness must be positive")
        capacity = self.sessions_per_week * MAX_SESSION_LENGTH
        if self.initial_catalog > capacity or self.new_items_per_week > capacity:
            problems.append(
                "weekly item introductions exceed what the sessions can display "
                f"({capacity} item slots per week)"
            )
        if problems:
            raise ValueError("; ".join(problems))

    @classmethod
    def from_dict(cls, raw: Mapping) -> "SyntheticConfig":
        known = {f: raw[f] for f in cls.__dataclass_fields__ if f in raw}
        unknown = sorted(set(raw) - set(cls.__dataclass_fields__))
        if unknown:
            raise ValueError(f"unknown synthetic config fields: {', '.join(unknown)}")
        config = cls(**known)
        config.validate()
        return config

    def schedule(self) -> list[int]:
        """Ground-truth count of items introduced each week."""
        return [self.initial_catalog] + [self.new_items_per_week] * (self.weeks - 1)


def synth_events(
    config: SyntheticConfig,
) -> tuple[list[ClickEvent], set[str], list[int]]:
    """Generate clicks and buys with a known item-introduction schedule.

    Items carry a latent quality: a per-category offset plus per-item noise.
    A session's purchase probability is the logistic of label_sharpness
    times the mean quality of its items, so categories genuinely inform
    cold-start initialization. Popularity is recency-biased: items from the
    current or previous week are drawn with double weight. Sampled sessions
    are then patched to display every item debuting this week, which keeps
    the churn schedule exact.
    """
    config.validate()
    total_items = config.initial_catalog + config.new_items_per_week * (config.weeks - 1)
    item_cat = np.arange(total_items) % config.categories
    gamma = np.random.default_rng(subseed(config.seed, "categories")).standard_normal(
        config.categories
    )
    delta = 0.5 * np.random.default_rng(subseed(config.seed, "items")).standard_normal(
        total_items
    )
    quality = gamma[item_cat] + delta
    intro_week = np.concatenate(
        [
            np.zeros(config.initial_catalog, dtype=np.int64),
            np.repeat(np.arange(1, config.weeks), config.new_items_per_week),
        ]
    )
    tokens = [str(100001 + i) for i in range(total_items)]

    rng_sessions = np.random.default_rng(subseed(config.seed, "sessions"))
    rng_labels = np.random.default_rng(subseed(config.seed, "labels"))
    p_len = min(1.0, 1.0 / config.session_length)

    clicks: list[ClickEvent] = []
    buys: set[str] = set()
    session_counter = 0
    session_gap = WEEK / config.sessions_per_week

    for week in range(config.weeks):
        available = np.flatnonzero(intro_week <= week)
        weights = np.where(intro_week[available] >= week - 1, 2.0, 1.0)
        probs = weights / weights.sum()

        week_sessions: list[list[int]] = []
        for _ in range(config.sessions_per_week):
            length = int(min(MAX_SESSION_LENGTH, max(1, rng_sessions.geometric(p_len))))
            picks = rng_sessions.choice(available, size=length, replace=True, p=probs)
            week_sessions.append([int(i) for i in picks])

        # Patch in any debut item that the sampling missed.
        debuts = set(np.flatnonzero(intro_week == week).tolist())
        shown = {i for sess in week_sessions for i in sess}
        target = 0
        for item in sorted(debuts - shown):
            placed = False
            for _ in range(len(week_sessions)):
                sess = week_sessions[target % len(week_sessions)]
                target += 1
                if len(sess) < MAX_SESSION_LENGTH:
                    sess.append(item)
                    placed = True
                    break
            if not placed:
                raise ValueError("cannot place all debut items; sessions are full")

        for j, item_ids in enumerate(week_sessions):
            session_counter += 1
            sid = str(session_counter)
            start = SYNTH_EPOCH + week * WEEK + j * session_gap
            step_ms = max(1, min(1000, int(session_gap.total_seconds() * 1000) // (len(item_ids) + 1)))
            for k, item in enumerate(item_ids):
                clicks.append(
                    ClickEvent(
                        session_id=sid,
                        timestamp=start + timedelta(milliseconds=k * step_ms),
                        item=tokens[item],
                        category=str(item_cat[item]),
                    )
                )
            p_buy = float(sigmoid(config.label_sharpness * quality[item_ids].mean()))
            if rng_labels.random() < p_buy:
                buys.add(sid)

    return clicks, buys, config.schedule()


def synth_generate(config: SyntheticConfig) -> list[WeekSegment]:
    """Synthetic week segments via the standard assembly pipeline."""
    clicks, buys, _ = synth_events(config)
    segments = partition_weeks(assemble_sessions(clicks, buys), collect_categories(clicks))
    if len(segments) != config.weeks:
        raise RuntimeError(
            f"generator produced {len(segments)} segments for {config.weeks} weeks"
        )
    return segments


def _format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%S") + f".{ts.microsecond // 1000:03d}Z"


def write_yoochoose(
    clicks: Sequence[ClickEvent],
    buys: Iterable[str],
    clicks_path: str | Path,
    buys_path: str | Path,
) -> None:
    """Write clicks/buys in the ingestible CSV formats.

    The buys file needs a representative row per purchase session; the
    session's last click supplies timestamp and item, with placeholder
    price and quantity.
    """
    last_click: dict[str, ClickEvent] = {}
    with Path(clicks_path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for event in clicks:
            writer.writerow(
                [
                    event.session_id,
                    _format_timestamp(event.timestamp),
                    event.item,
                    event.category if event.category is not None else "",
                ]
            )
            last_click[event.session_id] = event
    with Path(buys_path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for sid in sorted(buys, key=lambda s: (len(s), s)):
            event = last_click.get(sid)
            if event is None:
                logger.warning("buy session %s has no clicks; omitted from export", sid)
                continue
            writer.writerow(
                [sid, _format_timestamp(event.timestamp), event.item, 100, 1]
            )
