"""Command-line front door.

Subcommands: ``stats`` (weekly dataset statistics), ``synth`` (synthetic
clickstream generation), ``run`` (the weekly train/evaluate experiment),
``snapshot inspect`` (embedding snapshot introspection). Exit codes are a
stable contract for scripting: 0 success, 2 bad input or config, 3 a
runtime experiment failure. Data and results go to stdout, diagnostics to
stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .chart import render_chart
from .data import (
    ClickLogError,
    SyntheticConfig,
    assemble_sessions,
    collect_categories,
    load_buys,
    load_clicks,
    partition_weeks,
    synth_events,
    write_yoochoose,
)
from .figures import plot_new_items, plot_weekly_auc
from .harness import (
    ExperimentConfig,
    ExperimentError,
    export_results,
    run_experiment,
)
from .metrics import aggregate, new_items_per_week
from .snapshot import SnapshotFormatError, load_snapshot

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3


class _JsonLogFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps(
            {"level": record.levelname, "logger": record.name, "message": record.getMessage()}
        )


def _setup_logging(quiet: bool, json_logs: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(_JsonLogFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("dynemb")
    root.handlers[:] = [handler]
    root.setLevel(logging.WARNING if quiet else logging.INFO)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynemb",
        description="Dynamic embedding vocabularies: weekly statistics, "
        "synthetic data, incremental-training experiments, snapshots.",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed(s)")
    parser.add_argument("--quiet", action="store_true", help="log warnings and errors only")
    parser.add_argument("--json-logs", action="store_true", help="JSON log lines on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_stats = sub.add_parser("stats", help="weekly new-item and session statistics")
    p_stats.add_argument("--clicks", required=True, help="clicks CSV path")
    p_stats.add_argument("--buys", help="buys CSV path")
    p_stats.add_argument("--out", help="directory for stats.csv and the new-items figure")

    p_synth = sub.add_parser("synth", help="generate a synthetic clickstream")
    p_synth.add_argument("--config", required=True, help="synthetic config JSON path")
    p_synth.add_argument("--out", required=True, help="output directory")

    p_run = sub.add_parser("run", help="weekly train/evaluate experiment")
    p_run.add_argument("--clicks", required=True)
    p_run.add_argument("--buys", required=True)
    p_run.add_argument("--config", help="experiment config JSON path")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--approaches", help="comma-separated approach list override")
    p_run.add_argument("--seeds", help="comma-separated seed list override")
    p_run.add_argument("--dim", type=int, help="embedding dimension override")
    p_run.add_argument("--epochs", type=int, help="epochs per week override")
    p_run.add_argument("--prune-horizon", type=int, help="keep only the last K weeks of tokens")
    p_run.add_argument("--carry-head", action="store_true", help="carry the classifier head across weeks")
    p_run.add_argument(
        "--baseline-global-vocab", action="store_true",
        help="baseline uses the cumulative vocabulary (weights still reset)",
    )
    p_run.add_argument("--snapshots", action="store_true", help="save per-week embedding snapshots")
    p_run.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="max concurrent (approach, seed) runs")

    p_snap = sub.add_parser("snapshot", help="embedding snapshot tools")
    snap_sub = p_snap.add_subparsers(dest="snapshot_command", required=True)
    p_inspect = snap_sub.add_parser("inspect", help="print snapshot header and row norms")
    p_inspect.add_argument("path", help="snapshot file")
    p_inspect.add_argument("--json", action="store_true", help="machine-readable output")

    return parser


def _load_segments(clicks_path: str, buys_path: str | None):
    clicks = load_clicks(clicks_path)
    if not clicks:
        raise ClickLogError(f"{clicks_path}: no usable click events")
    buys = load_buys(buys_path) if buys_path else set()
    sessions = assemble_sessions(clicks, buys)
    return partition_weeks(sessions, collect_categories(clicks))


def _cmd_stats(args) -> int:
    segments = _load_segments(args.clicks, args.buys)
    counts = new_items_per_week(segments)
    lines = ["week,new_items,sessions,positive_rate"]
    for seg, fresh in zip(segments, counts):
        n = len(seg.sessions)
        rate = (sum(seg.labels()) / n) if n else 0.0
        lines.append(f"{seg.index},{fresh},{n},{rate:.4f}")
    body = "\n".join(lines) + "\n"
    sys.stdout.write(body)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "stats.csv").write_text(body, encoding="utf-8")
        plot_new_items(counts, out / "new_items.png")
        logger.info("wrote %s and %s", out / "stats.csv", out / "new_items.png")
    return EXIT_OK


def _cmd_synth(args, seed_override: int | None) -> int:
    raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if seed_override is not None:
        raw["seed"] = seed_override
    config = SyntheticConfig.from_dict(raw)
    clicks, buys, schedule = synth_events(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_yoochoose(clicks, buys, out / "clicks.csv", out / "buys.csv")
    logger.info(
        "wrote %d clicks / %d buy sessions across %d weeks (schedule %s)",
        len(clicks), len(buys), config.weeks, schedule,
    )
    return EXIT_OK


def _experiment_config(args, seed_override: int | None) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.approaches:
        raw["approaches"] = [a.strip() for a in args.approaches.split(",") if a.strip()]
    if args.seeds:
        raw["seeds"] = [int(s) for s in args.seeds.split(",") if s.strip()]
    if seed_override is not None:
        raw["seeds"] = [seed_override]
    if args.dim is not None:
        raw["dim"] = args.dim
    if args.epochs is not None:
        raw.setdefault("train", {})["epochs_per_segment"] = args.epochs
    if args.prune_horizon is not None:
        raw["vocab_policy"] = "sliding"
        raw["prune_horizon"] = args.prune_horizon
    if args.carry_head:
        raw["carry_head"] = True
    if args.baseline_global_vocab:
        raw["baseline_global_vocab"] = True
    config = ExperimentConfig.from_dict(raw)
    if "similar" in config.approaches:
        raise ValueError(
            "approach 'similar' needs a similarity provider and is only "
            "available through the library API"
        )
    return config


def _cmd_run(args, seed_override: int | None) -> int:
    config = _experiment_config(args, seed_override)
    segments = _load_segments(args.clicks, args.buys)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = run_experiment(
        config,
        segments,
        jobs=max(1, args.jobs),
        snapshot_dir=(out / "snapshots") if args.snapshots else None,
    )
    export_results(table, out / "results.csv", "csv")
    export_results(table, out / "results.json", "json")
    render_chart(table, out / "chart.svg")
    plot_weekly_auc(table, out / "chart.png")
    for skip in table.skips:
        logger.warning(
            "skipped %s week %d seed %d: %s", skip.approach, skip.week, skip.seed, skip.reason
        )
    for name, summary in aggregate(table.rows).items():
        sys.stdout.write(f"{name}: {summary.mean:.3f} ± {summary.std:.3f}\n")
    logger.info("wrote results and charts under %s", out)
    return EXIT_OK


def _cmd_snapshot_inspect(args) -> int:
    snap = load_snapshot(args.path)
    norms = np.linalg.norm(snap.weights, axis=1)
    if args.json:
        payload = {
            "version": 1,
            "vocab_size": len(snap.vocab),
            "dim": int(snap.weights.shape[1]),
            "metadata": snap.metadata,
            "row_l2_norms": {
                "min": float(norms.min()),
                "mean": float(norms.mean()),
                "max": float(norms.max()),
            },
        }
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(
            "\n".join(
                [
                    "version=1",
                    f"vocab_size={len(snap.vocab)}",
                    f"dim={snap.weights.shape[1]}",
                    f"metadata={json.dumps(snap.metadata, sort_keys=True)}",
                    f"row_l2_norm_min={norms.min():.6g}",
                    f"row_l2_norm_mean={norms.mean():.6g}",
                    f"row_l2_norm_max={norms.max():.6g}",
                ]
            )
            + "\n"
        )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.quiet, args.json_logs)
    try:
        if args.command == "stats":
            return _cmd_stats(args)
        if args.command == "synth":
            return _cmd_synth(args, args.seed)
        if args.command == "run":
            return _cmd_run(args, args.seed)
        if args.command == "snapshot":
            return _cmd_snapshot_inspect(args)
        parser.error(f"unknown command {args.command!r}")
    except (ClickLogError, SnapshotFormatError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except (ValueError, json.JSONDecodeError) as exc:
        logger.error("invalid input or config: %s", exc)
        return EXIT_INPUT
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except ExperimentError as exc:
        logger.error("experiment failed: %s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
