"""dynemb: dynamic embedding vocabularies for weekly incremental training.

The package grows (and shrinks) an embedding table against an evolving
item catalog without losing learned rows, offers several cold-start
initializers for fresh items, and ships a benchmark harness that trains on
one week of sessions and evaluates AUC on the next.
"""

__version__ = "0.1.0"

from .vocab import UNK, VocabMap
from .embedding import (
    CategoryAverage,
    FeatureSimilar,
    GlobalAverage,
    InitStrategy,
    RandomInit,
    STRATEGIES,
    UnknownCopy,
    init_row,
    new_random,
    remap,
)
from .snapshot import Snapshot, SnapshotFormatError, load_snapshot, save_snapshot
from .metrics import (
    ApproachSummary,
    UndefinedAucError,
    WeeklyAuc,
    aggregate,
    auc,
    new_items_per_week,
)
from .model import (
    AdamState,
    ClassifierParams,
    ElmanParams,
    TrainConfig,
    adam_step,
    encode_session,
    forward,
    gradients,
    loss,
    new_params,
    score_sessions,
    sigmoid,
    train_segment,
)
from .data import (
    ClickEvent,
    ClickLogError,
    Session,
    SyntheticConfig,
    WeekSegment,
    assemble_sessions,
    collect_categories,
    load_buys,
    load_clicks,
    partition_weeks,
    synth_events,
    synth_generate,
    write_yoochoose,
)
from .harness import (
    APPROACHES,
    ExperimentConfig,
    ExperimentError,
    ResultTable,
    SkippedWeek,
    export_results,
    fingerprint_segments,
    load_results_json,
    run_experiment,
)
from .chart import render_chart
from .figures import plot_new_items, plot_weekly_auc
from .seeding import subrng, subseed

__all__ = [
    "UNK",
    "VocabMap",
    "RandomInit",
    "UnknownCopy",
    "GlobalAverage",
    "CategoryAverage",
    "FeatureSimilar",
    "InitStrategy",
    "STRATEGIES",
    "new_random",
    "init_row",
    "remap",
    "Snapshot",
    "SnapshotFormatError",
    "save_snapshot",
    "load_snapshot",
    "WeeklyAuc",
    "ApproachSummary",
    "UndefinedAucError",
    "auc",
    "aggregate",
    "new_items_per_week",
    "TrainConfig",
    "ClassifierParams",
    "ElmanParams",
    "AdamState",
    "sigmoid",
    "forward",
    "loss",
    "gradients",
    "adam_step",
    "new_params",
    "encode_session",
    "train_segment",
    "score_sessions",
    "ClickEvent",
    "Session",
    "WeekSegment",
    "SyntheticConfig",
    "ClickLogError",
    "load_clicks",
    "load_buys",
    "assemble_sessions",
    "collect_categories",
    "partition_weeks",
    "synth_events",
    "synth_generate",
    "write_yoochoose",
    "APPROACHES",
    "ExperimentConfig",
    "ExperimentError",
    "ResultTable",
    "SkippedWeek",
    "run_experiment",
    "export_results",
    "load_results_json",
    "fingerprint_segments",
    "render_chart",
    "plot_weekly_auc",
    "plot_new_items",
    "subseed",
    "subrng",
]
