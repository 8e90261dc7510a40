"""Experiment orchestration, logging and the command line front end."""
from a3ps.harness.experiment import (
    DESK_ALPHA,
    DESK_PPO,
    ExperimentConfig,
    SeedResult,
    greedy_episode,
    load_scorer,
    run_experiment,
    run_seed,
)
from a3ps.harness.logs import (
    CSV_COLUMNS,
    ComparisonReport,
    EpisodeLog,
    compare_runs,
    emit_csv,
    emit_plotdata,
    first_goal,
    goal_rate,
    read_csv,
    smooth_curve,
)

__all__ = [
    "CSV_COLUMNS", "DESK_ALPHA", "DESK_PPO", "ComparisonReport", "EpisodeLog", "ExperimentConfig",
    "SeedResult", "compare_runs", "emit_csv", "emit_plotdata", "first_goal", "goal_rate",
    "greedy_episode", "load_scorer", "read_csv", "run_experiment", "run_seed", "smooth_curve",
]
