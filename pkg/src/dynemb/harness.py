"""Weekly train/evaluate protocol over competing vocabulary approaches.

For every (approach, seed) pair: train on week t, evaluate AUC on week
t+1, for t = 0 .. T-2. The baseline rebuilds vocabulary and weights from
scratch each week; incremental approaches extend the vocabulary
cumulatively (optionally pruning a sliding window) and rebuild the
embedding via :func:`dynemb.embedding.remap`, carrying every learned row
forward. Only the embedding crosses weeks by default; aggregator and
output head are re-initialized so the comparison isolates embedding
transfer. All randomness is drawn from named substreams of the run seed,
so approaches sharing a seed see identical shuffles and identical
evaluation data.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import time
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .data import WeekSegment
from .embedding import (
    CategoryAverage,
    FeatureSimilar,
    GlobalAverage,
    InitStrategy,
    RandomInit,
    UnknownCopy,
    new_random,
    remap,
)
from .metrics import UndefinedAucError, WeeklyAuc, auc
from .model import ClassifierParams, TrainConfig, new_params, score_sessions, train_segment
from .seeding import subseed
from .snapshot import Snapshot, save_snapshot
from .vocab import VocabMap

APPROACHES = ("baseline", "random", "average", "unknown", "category", "similar")


class ExperimentError(RuntimeError):
    """Experiment cannot run (bad segments, missing provider, ...)."""


@dataclass
class ExperimentConfig:
    approaches: tuple[str, ...] = ("baseline", "random", "average", "unknown")
    seeds: tuple[int, ...] = tuple(range(10))
    dim: int = 32
    init_scale: float = 0.1
    aggregator: str = "mean"
    vocab_policy: str = "cumulative"   # or "sliding"
    prune_horizon: int = 0             # weeks kept under the sliding policy
    carry_head: bool = False
    baseline_global_vocab: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> None:
        problems = []
        if not self.approaches:
            problems.append("at least one approach is required")
        for name in self.approaches:
            if name not in APPROACHES:
                problems.append(f"unknown approach {name!r} (expected one of {', '.join(APPROACHES)})")
        if not self.seeds:
            problems.append("at least one seed is required")
        if self.dim < 1:
            problems.append("dim must be >= 1")
        if not self.init_scale > 0:
            problems.append("init_scale must be positive")
        if self.aggregator not in ("mean", "elman"):
            problems.append("aggregator must be 'mean' or 'elman'")
        if self.vocab_policy not in ("cumulative", "sliding"):
            problems.append("vocab_policy must be 'cumulative' or 'sliding'")
        if self.vocab_policy == "sliding" and self.prune_horizon < 1:
            problems.append("sliding vocab_policy needs prune_horizon >= 1")
        try:
            self.train.validate()
        except ValueError as exc:
            problems.append(str(exc))
        if problems:
            raise ValueError("; ".join(problems))

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        train_raw = raw.pop("train", {})
        unknown = sorted(set(raw) - set(cls.__dataclass_fields__))
        if unknown:
            raise ValueError(f"unknown experiment config fields: {', '.join(unknown)}")
        unknown_train = sorted(set(train_raw) - set(TrainConfig.__dataclass_fields__))
        if unknown_train:
            raise ValueError(f"unknown train config fields: {', '.join(unknown_train)}")
        kwargs = dict(raw)
        if "approaches" in kwargs:
            kwargs["approaches"] = tuple(kwargs["approaches"])
        if "seeds" in kwargs:
            kwargs["seeds"] = tuple(int(s) for s in kwargs["seeds"])
        config = cls(train=TrainConfig(**train_raw), **kwargs)
        config.validate()
        return config

    def to_dict(self) -> dict:
        out = asdict(self)
        out["approaches"] = list(self.approaches)
        out["seeds"] = list(self.seeds)
        return out


@dataclass(frozen=True)
class SkippedWeek:
    approach: str
    week: int
    seed: int
    reason: str


@dataclass
class ResultTable:
    rows: list[WeeklyAuc]
    skips: list[SkippedWeek] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def fingerprint_segments(segments: Sequence[WeekSegment]) -> str:
    """Stable digest of the partitioned data, for result provenance."""
    digest = hashlib.sha256()
    for seg in segments:
        record = [
            seg.index,
            seg.start.isoformat(),
            len(seg.sessions),
            sum(len(s.items) for s in seg.sessions),
            sum(s.label for s in seg.sessions),
        ]
        digest.update(json.dumps(record).encode())
        for session in seg.sessions:
            digest.update(session.session_id.encode())
            digest.update(b"\x00")
    return digest.hexdigest()


def _strategy_for(
    approach: str,
    config: ExperimentConfig,
    similarity: Optional[Callable | dict],
) -> InitStrategy:
    if approach == "random":
        return RandomInit(config.init_scale)
    if approach == "average":
        return GlobalAverage()
    if approach == "unknown":
        return UnknownCopy()
    if approach == "category":
        return CategoryAverage()
    if approach == "similar":
        if similarity is None:
            raise ExperimentError("approach 'similar' requires a similarity provider")
        return FeatureSimilar(similarity)
    raise ExperimentError(f"no init strategy for approach {approach!r}")


def _segment_tokens(segment: WeekSegment) -> list[str]:
    return [item for session in segment.sessions for item in session.items]


def _run_single(
    approach: str,
    seed: int,
    config: ExperimentConfig,
    segments: Sequence[WeekSegment],
    similarity: Optional[Callable | dict] = None,
    snapshot_dir: Optional[Path] = None,
) -> tuple[list[WeeklyAuc], list[SkippedWeek]]:
    rows: list[WeeklyAuc] = []
    skips: list[SkippedWeek] = []
    prev_vocab: Optional[VocabMap] = None
    prev_emb: Optional[np.ndarray] = None
    carried_head: Optional[ClassifierParams] = None
    item_history: list[set[str]] = []

    for t in range(len(segments) - 1):
        segment = segments[t]
        tokens = _segment_tokens(segment)
        item_history.append(set(tokens))

        if approach == "baseline" and not config.baseline_global_vocab:
            vocab = VocabMap.build(tokens, segment.categories)
        elif prev_vocab is None:
            vocab = VocabMap.build(tokens, segment.categories)
        else:
            vocab = prev_vocab.union_extend(tokens, segment.categories)
            if config.vocab_policy == "sliding":
                keep: set[str] = set()
                for week_items in item_history[-config.prune_horizon:]:
                    keep |= week_items
                vocab = vocab.prune(keep)

        if approach == "baseline" or prev_emb is None:
            emb = new_random(vocab, config.dim, subseed(seed, "emb-init", t), config.init_scale)
        else:
            strategy = _strategy_for(approach, config, similarity)
            emb = remap(
                vocab, prev_vocab, prev_emb, strategy,
                np.random.default_rng(subseed(seed, "remap", t)),
            )

        if config.carry_head and carried_head is not None and approach != "baseline":
            params = ClassifierParams(
                emb=emb,
                agg=carried_head.agg,
                w_out=carried_head.w_out,
                b_out=carried_head.b_out,
            )
        else:
            params = new_params(
                emb, config.aggregator,
                np.random.default_rng(subseed(seed, "head-init", t)),
                config.init_scale,
            )

        trainable = [s for s in segment.sessions if s.items]
        if not trainable:
            skips.append(SkippedWeek(approach, t, seed, "empty training week"))
            prev_vocab, prev_emb = vocab, emb
            continue
        params = train_segment(
            params, vocab, trainable, config.train, subseed(seed, "shuffle", t)
        )
        prev_vocab, prev_emb = vocab, params.emb
        carried_head = params

        if snapshot_dir is not None:
            meta = {
                "approach": approach,
                "seed": seed,
                "week": t,
                "created_at": datetime.now(timezone.utc).isoformat(),
            }
            save_snapshot(
                Snapshot(vocab, params.emb, meta),
                Path(snapshot_dir) / f"{approach}_seed{seed}_week{t:02d}.emb",
            )

        eval_sessions = segments[t + 1].sessions
        scores, skipped = score_sessions(params, vocab, eval_sessions, config.train)
        dropped = set(skipped)
        labels = [s.label for i, s in enumerate(eval_sessions) if i not in dropped]
        if not scores:
            skips.append(SkippedWeek(approach, t, seed, "empty evaluation week"))
            continue
        try:
            value = auc(scores, labels)
        except UndefinedAucError:
            skips.append(SkippedWeek(approach, t, seed, "single-class evaluation week"))
            continue
        rows.append(WeeklyAuc(approach, t, seed, value))

    return rows, skips


def _run_task(args) -> tuple[list[WeeklyAuc], list[SkippedWeek]]:
    return _run_single(*args)


def run_experiment(
    config: ExperimentConfig,
    segments: Sequence[WeekSegment],
    similarity: Optional[Callable | dict] = None,
    jobs: int = 1,
    snapshot_dir: Optional[str | Path] = None,
) -> ResultTable:
    """Execute the full protocol; rows are sorted, so output is
    independent of scheduling order.

    (approach, seed) runs are independent; ``jobs`` > 1 fans them out over
    processes, which requires the config and any similarity provider to be
    picklable.
    """
    config.validate()
    segments = list(segments)
    if len(segments) < 2:
        raise ExperimentError("need at least 2 week segments (train week + eval week)")
    if "similar" in config.approaches and similarity is None:
        raise ExperimentError("approach 'similar' requires a similarity provider")
    if snapshot_dir is not None:
        snapshot_dir = Path(snapshot_dir)
        snapshot_dir.mkdir(parents=True, exist_ok=True)

    started = time.time()
    tasks = [
        (approach, seed, config, segments, similarity, snapshot_dir)
        for approach in config.approaches
        for seed in config.seeds
    ]
    if jobs > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_task, tasks))
    else:
        outcomes = [_run_task(task) for task in tasks]

    rows: list[WeeklyAuc] = []
    skips: list[SkippedWeek] = []
    for got_rows, got_skips in outcomes:
        rows.extend(got_rows)
        skips.extend(got_skips)
    rows.sort(key=lambda r: (r.approach, r.week, r.seed))
    skips.sort(key=lambda s: (s.approach, s.week, s.seed))

    metadata = {
        "config": config.to_dict(),
        "data_fingerprint": fingerprint_segments(segments),
        "segments": len(segments),
        "wall_clock_seconds": round(time.time() - started, 3),
        "package_version": __version__,
        "aggregation": "per-week mean over seeds, then mean and n-1 std over weeks",
    }
    return ResultTable(rows=rows, skips=skips, metadata=metadata)


def export_results(table: ResultTable, path: str | Path, format: str = "csv") -> None:
    """Write the table as ``csv`` (rows only) or ``json`` (with metadata).

    Row order and field order are fixed, so repeated exports of the same
    table are byte-identical (the JSON wall-clock metadata excepted).
    """
    path = Path(path)
    rows = sorted(table.rows, key=lambda r: (r.approach, r.week, r.seed))
    if format == "csv":
        lines = ["approach,week,seed,auc"]
        lines += [f"{r.approach},{r.week},{r.seed},{r.auc!r}" for r in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif format == "json":
        payload = {
            "metadata": table.metadata,
            "rows": [
                {"approach": r.approach, "week": r.week, "seed": r.seed, "auc": r.auc}
                for r in rows
            ],
            "skips": [
                {"approach": s.approach, "week": s.week, "seed": s.seed, "reason": s.reason}
                for s in sorted(table.skips, key=lambda s: (s.approach, s.week, s.seed))
            ],
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown export format {format!r}, expected 'csv' or 'json'")


def load_results_json(path: str | Path) -> ResultTable:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return ResultTable(
        rows=[WeeklyAuc(**row) for row in payload.get("rows", [])],
        skips=[SkippedWeek(**skip) for skip in payload.get("skips", [])],
        metadata=payload.get("metadata", {}),
    )
