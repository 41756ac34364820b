import json
import re
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from dynemb import (
    ExperimentConfig,
    ExperimentError,
    Session,
    SyntheticConfig,
    TrainConfig,
    export_results,
    fingerprint_segments,
    load_results_json,
    load_snapshot,
    partition_weeks,
    render_chart,
    run_experiment,
    synth_generate,
)
from dynemb.harness import _run_single
from dynemb.metrics import WeeklyAuc
from dynemb.harness import ResultTable

UTC = timezone.utc


def ts(day):
    return datetime(2021, 3, 1, tzinfo=UTC) + timedelta(days=day)


def make_segments(weeks):
    """weeks: per week, a list of (items tuple, label) session specs."""
    sessions = []
    sid = 0
    for w, specs in enumerate(weeks):
        for j, (items, label) in enumerate(specs):
            sid += 1
            sessions.append(Session(str(sid), tuple(items), label, ts(7 * w + 0.01 * j)))
    return partition_weeks(sessions)


def tiny_config(**overrides):
    base = dict(
        approaches=("baseline", "unknown"),
        seeds=(0,),
        dim=4,
        train=TrainConfig(epochs_per_segment=1, minibatch_size=8),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def small_synth_segments(weeks=4, seed=17):
    return synth_generate(
        SyntheticConfig(
            weeks=weeks, initial_catalog=20, new_items_per_week=5,
            sessions_per_week=30, session_length=4.0, categories=4, seed=seed,
        )
    )


class TestRunExperiment:
    def test_minimal_arity(self):
        segments = make_segments(
            [
                [(("a", "b"), 1), (("b",), 0), (("a",), 1), (("c",), 0)],
                [(("a",), 1), (("b", "c"), 0)],
            ]
        )
        table = run_experiment(tiny_config(approaches=("unknown",)), segments)
        assert len(table.rows) == 1
        assert table.rows[0].approach == "unknown"
        assert table.rows[0].week == 0

    def test_row_count_for_four_weeks_two_seeds(self):
        segments = small_synth_segments()
        config = tiny_config(seeds=(0, 1))
        table = run_experiment(config, segments)
        assert len(table.rows) + len(table.skips) == 2 * 3 * 2
        assert {r.week for r in table.rows} <= {0, 1, 2}

    def test_deterministic_modulo_wall_clock(self):
        segments = small_synth_segments()
        config = tiny_config(seeds=(3,))
        a = run_experiment(config, segments)
        b = run_experiment(config, segments)
        assert a.rows == b.rows
        assert a.skips == b.skips
        assert a.metadata["data_fingerprint"] == b.metadata["data_fingerprint"]

    def test_parallel_matches_serial(self):
        segments = small_synth_segments(weeks=3)
        config = tiny_config(seeds=(0, 1))
        serial = run_experiment(config, segments, jobs=1)
        parallel = run_experiment(config, segments, jobs=2)
        assert serial.rows == parallel.rows

    def test_week_zero_identical_across_approaches(self):
        segments = small_synth_segments(weeks=3)
        config = tiny_config(approaches=("baseline", "random", "average", "unknown"))
        table = run_experiment(config, segments)
        week0 = {r.approach: r.auc for r in table.rows if r.week == 0}
        assert len(set(week0.values())) == 1

    def test_needs_two_segments(self):
        segments = make_segments([[(("a",), 1), (("b",), 0)]])
        with pytest.raises(ExperimentError, match="at least 2"):
            run_experiment(tiny_config(), segments)

    def test_similar_requires_provider(self):
        segments = small_synth_segments(weeks=3)
        with pytest.raises(ExperimentError, match="similarity provider"):
            run_experiment(tiny_config(approaches=("similar",)), segments)

    def test_similar_with_provider_runs(self):
        segments = small_synth_segments(weeks=3)
        table = run_experiment(
            tiny_config(approaches=("similar",)), segments, similarity={}
        )
        assert table.rows

    def test_category_approach_runs(self):
        segments = small_synth_segments(weeks=3)
        table = run_experiment(tiny_config(approaches=("category",)), segments)
        assert table.rows

    def test_single_class_eval_week_skipped(self):
        segments = make_segments(
            [
                [(("a", "b"), 1), (("b",), 0)],
                [(("a",), 0), (("b",), 0)],
            ]
        )
        table = run_experiment(tiny_config(approaches=("unknown",)), segments)
        assert table.rows == []
        assert table.skips[0].reason == "single-class evaluation week"

    def test_baseline_isolation_from_earlier_weeks(self):
        weeks = [
            [(("a", "b"), 1), (("c",), 0)],
            [(("a", "d"), 1), (("b",), 0), (("d", "c"), 1), (("a",), 0)],
            [(("d",), 1), (("a", "c"), 0)],
        ]
        mutated = [
            [(("zz", "qq"), 0), (("rr",), 1), (("qq",), 1)],
            weeks[1],
            weeks[2],
        ]
        config = tiny_config(approaches=("baseline",))
        rows_a = run_experiment(config, make_segments(weeks)).rows
        rows_b = run_experiment(config, make_segments(mutated)).rows
        week1_a = [r for r in rows_a if r.week == 1]
        week1_b = [r for r in rows_b if r.week == 1]
        assert week1_a == week1_b

    def test_sliding_vocab_policy_prunes(self, tmp_path):
        segments = small_synth_segments(weeks=4)
        cumulative = tiny_config(approaches=("unknown",))
        sliding = tiny_config(
            approaches=("unknown",), vocab_policy="sliding", prune_horizon=1
        )
        run_experiment(cumulative, segments, snapshot_dir=tmp_path / "cum")
        run_experiment(sliding, segments, snapshot_dir=tmp_path / "sli")
        week2_cum = load_snapshot(tmp_path / "cum" / "unknown_seed0_week02.emb")
        week2_sli = load_snapshot(tmp_path / "sli" / "unknown_seed0_week02.emb")
        assert len(week2_sli.vocab) < len(week2_cum.vocab)

    def test_carryover_rows_preserved_across_weeks(self, tmp_path):
        # "x" appears only in week 0; its trained row must survive week 1
        # training bit for bit (remap copies it, gradients never touch it).
        weeks = [
            [(("x", "a"), 1), (("a", "b"), 0), (("b",), 1), (("a",), 0)],
            [(("a", "b"), 1), (("b",), 0), (("a",), 1), (("b", "a"), 0)],
            [(("a",), 1), (("b",), 0)],
        ]
        segments = make_segments(weeks)
        config = tiny_config(approaches=("unknown",), train=TrainConfig(epochs_per_segment=3))
        run_experiment(config, segments, snapshot_dir=tmp_path)
        week0 = load_snapshot(tmp_path / "unknown_seed0_week00.emb")
        week1 = load_snapshot(tmp_path / "unknown_seed0_week01.emb")
        row0 = week0.weights[week0.vocab.lookup("x")]
        row1 = week1.weights[week1.vocab.lookup("x")]
        assert "x" in week1.vocab
        assert row0.tobytes() == row1.tobytes()
        # sanity: rows that were trained in week 1 did change
        a0 = week0.weights[week0.vocab.lookup("a")]
        a1 = week1.weights[week1.vocab.lookup("a")]
        assert a0.tobytes() != a1.tobytes()

    def test_snapshot_metadata(self, tmp_path):
        segments = small_synth_segments(weeks=3)
        run_experiment(tiny_config(approaches=("unknown",)), segments, snapshot_dir=tmp_path)
        snap = load_snapshot(tmp_path / "unknown_seed0_week01.emb")
        assert snap.metadata["approach"] == "unknown"
        assert snap.metadata["week"] == 1
        assert snap.metadata["seed"] == 0

    def test_carry_head_changes_results(self):
        segments = small_synth_segments(weeks=4)
        plain = run_experiment(tiny_config(approaches=("unknown",)), segments)
        carried = run_experiment(
            tiny_config(approaches=("unknown",), carry_head=True), segments
        )
        assert plain.rows != carried.rows

    def test_fingerprint_sensitive_to_labels(self):
        weeks = [[(("a",), 1), (("b",), 0)], [(("a",), 1), (("b",), 0)]]
        flipped = [[(("a",), 0), (("b",), 0)], weeks[1]]
        assert fingerprint_segments(make_segments(weeks)) != fingerprint_segments(
            make_segments(flipped)
        )


class TestExperimentConfig:
    def test_from_dict_roundtrip(self):
        config = ExperimentConfig.from_dict(
            {
                "approaches": ["baseline", "unknown"],
                "seeds": [0, 1, 2],
                "dim": 8,
                "train": {"epochs_per_segment": 2, "learning_rate": 0.01},
            }
        )
        assert config.approaches == ("baseline", "unknown")
        assert config.seeds == (0, 1, 2)
        assert config.train.epochs_per_segment == 2
        rebuilt = ExperimentConfig.from_dict(config.to_dict())
        assert rebuilt == config

    def test_unknown_fields_rejected(self):
        with pytest.raises(ValueError, match="unknown experiment config fields: bogus"):
            ExperimentConfig.from_dict({"bogus": 1})
        with pytest.raises(ValueError, match="unknown train config fields"):
            ExperimentConfig.from_dict({"train": {"nope": 1}})

    def test_bad_approach_rejected(self):
        with pytest.raises(ValueError, match="unknown approach"):
            ExperimentConfig.from_dict({"approaches": ["warp"]})

    def test_sliding_needs_horizon(self):
        with pytest.raises(ValueError, match="prune_horizon"):
            ExperimentConfig.from_dict({"vocab_policy": "sliding"})

    def test_defaults_match_protocol(self):
        config = ExperimentConfig()
        assert len(config.seeds) == 10
        assert config.approaches == ("baseline", "random", "average", "unknown")


class TestExport:
    def table(self):
        rows = [
            WeeklyAuc("unknown", 0, 0, 0.75),
            WeeklyAuc("baseline", 0, 0, 0.5),
            WeeklyAuc("baseline", 1, 0, 0.625),
        ]
        return ResultTable(rows=rows, metadata={"segments": 3})

    def test_csv_layout_and_determinism(self, tmp_path):
        path = tmp_path / "results.csv"
        export_results(self.table(), path, "csv")
        text = path.read_text()
        lines = text.strip().split("\n")
        assert lines[0] == "approach,week,seed,auc"
        assert lines[1] == "baseline,0,0,0.5"
        assert len(lines) == 4
        export_results(self.table(), tmp_path / "again.csv", "csv")
        assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()

    def test_empty_table_is_header_only(self, tmp_path):
        export_results(ResultTable(rows=[]), tmp_path / "empty.csv", "csv")
        assert (tmp_path / "empty.csv").read_text() == "approach,week,seed,auc\n"

    def test_json_roundtrip_exact(self, tmp_path):
        path = tmp_path / "results.json"
        table = self.table()
        export_results(table, path, "json")
        loaded = load_results_json(path)
        assert sorted(loaded.rows, key=lambda r: (r.approach, r.week, r.seed)) == sorted(
            table.rows, key=lambda r: (r.approach, r.week, r.seed)
        )
        assert loaded.metadata == table.metadata
        payload = json.loads(path.read_text())
        assert {row["auc"] for row in payload["rows"]} == {0.75, 0.5, 0.625}

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown export format"):
            export_results(self.table(), tmp_path / "x", "yaml")


class TestRenderChart:
    def rows(self, approaches, weeks):
        return [
            WeeklyAuc(a, w, 0, 0.5 + 0.01 * (w + 1) * (i + 1))
            for i, a in enumerate(approaches)
            for w in range(weeks)
        ]

    def test_one_polyline_per_approach_with_week_vertices(self, tmp_path):
        table = ResultTable(rows=self.rows(["unknown"], 3))
        path = tmp_path / "chart.svg"
        render_chart(table, path)
        svg = path.read_text()
        polylines = re.findall(r"<polyline points=\"([^\"]+)\"", svg)
        assert len(polylines) == 1
        assert len(polylines[0].split(" ")) == 3

    def test_legend_entry_per_approach(self, tmp_path):
        table = ResultTable(rows=self.rows(["a1", "a2", "a3", "a4"], 2))
        render_chart(table, tmp_path / "chart.svg")
        svg = (tmp_path / "chart.svg").read_text()
        assert svg.count('class="legend-item"') == 4
        assert len(re.findall(r"<polyline ", svg)) == 4

    def test_byte_deterministic(self, tmp_path):
        table = ResultTable(rows=self.rows(["x", "y"], 5))
        render_chart(table, tmp_path / "a.svg")
        render_chart(table, tmp_path / "b.svg")
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_empty_table_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            render_chart(ResultTable(rows=[]), tmp_path / "chart.svg")


def test_run_single_reports_empty_training_week():
    weeks = [
        [(("a", "b"), 1), (("b",), 0)],
        [],
        [(("a",), 1), (("b",), 0)],
    ]
    sessions = []
    sid = 0
    for w, specs in enumerate(weeks):
        for j, (items, label) in enumerate(specs):
            sid += 1
            sessions.append(Session(str(sid), tuple(items), label, ts(7 * w + 0.01 * j)))
    segments = partition_weeks(sessions)
    assert len(segments) == 3
    rows, skips = _run_single("unknown", 0, tiny_config(approaches=("unknown",)), segments)
    assert any(s.reason == "empty training week" and s.week == 1 for s in skips)
