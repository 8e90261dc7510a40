"""Episode logs, smoothing, CSV and plot-data emission, run comparison."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from a3ps.errors import ContractError, ParseError

CSV_COLUMNS = ("episode", "reward", "steps", "reached_goal", "alpha", "smoothed_reward")


@dataclass(frozen=True)
class EpisodeLog:
    episode: int
    reward: float
    steps: int
    reached_goal: bool
    alpha: float
    wall_ms: float = 0.0


def smooth_curve(series, window: int) -> np.ndarray:
    """Trailing mean; the first ``window - 1`` entries average what is available."""
    if window < 1:
        raise ContractError(f"window must be >= 1 (got {window})")
    x = np.asarray(series, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(0, idx - window)
    return (c[idx] - c[lo]) / (idx - lo)


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_csv(path, logs, window: int = 100) -> None:
    """Write one row per episode.  Wall-clock time is left out so output is reproducible."""
    logs = list(logs)
    if not logs:
        raise ContractError("no episode logs to write")
    smoothed = smooth_curve([log.reward for log in logs], window)
    lines = [",".join(CSV_COLUMNS)]
    for log, s in zip(logs, smoothed):
        lines.append(f"{log.episode},{_fmt(log.reward)},{log.steps},{int(log.reached_goal)},{_fmt(log.alpha)},{_fmt(s)}")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_csv(path) -> list[EpisodeLog]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ParseError(f"expected header {','.join(CSV_COLUMNS)}", 1)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            ep, rew, steps, goal, alpha, _ = row
            out.append(EpisodeLog(int(ep), float(rew), int(steps), goal == "1", float(alpha)))
        except ValueError as exc:
            raise ParseError(f"malformed row: {exc}", lineno) from None
    return out


def emit_plotdata(path, runs: dict[str, list[float]]) -> None:
    """Aligned table with one column per run; shorter runs are padded with empty cells."""
    names = list(runs)
    n = max((len(v) for v in runs.values()), default=0)
    lines = [",".join(["episode", *names])]
    for i in range(n):
        cells = [_fmt(runs[k][i]) if i < len(runs[k]) else "" for k in names]
        lines.append(",".join([str(i), *cells]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def first_goal(logs) -> int | None:
    return next((log.episode for log in logs if log.reached_goal), None)


def goal_rate(logs, last: int = 500) -> float:
    tail = list(logs)[-last:]
    return sum(log.reached_goal for log in tail) / len(tail)


@dataclass(frozen=True)
class SeedComparison:
    seed: int
    first_goal: tuple[int | None, int | None]
    early_mean: tuple[float, float]
    final_mean: tuple[float, float]
    final_goal_rate: tuple[float, float]

    @property
    def earlier_goal(self) -> bool:
        a, e = self.first_goal
        return a is not None and (e is None or a < e)

    @property
    def better_early(self) -> bool:
        return self.early_mean[0] > self.early_mean[1]


@dataclass(frozen=True)
class ComparisonReport:
    seeds: tuple[SeedComparison, ...]
    final_window: int

    def count(self, attr: str) -> int:
        return sum(bool(getattr(s, attr)) for s in self.seeds)

    def sparse_counts(self, eda_max: float = 0.05, a3ps_min: float = 0.5) -> tuple[int, int]:
        eda_ok = sum(s.final_goal_rate[1] <= eda_max for s in self.seeds)
        a3ps_ok = sum(s.final_goal_rate[0] >= a3ps_min for s in self.seeds)
        return eda_ok, a3ps_ok

    def text(self) -> str:
        n = len(self.seeds)
        need = (2 * n + 2) // 3
        out = ["seed  first_goal(a3ps/eda)  early_mean(a3ps/eda)  final_mean(a3ps/eda)  final_goal_rate(a3ps/eda)"]
        for s in self.seeds:
            fg = "/".join("-" if v is None else str(v) for v in s.first_goal)
            out.append(
                f"{s.seed:<5} {fg:<21} {s.early_mean[0]:>9.2f}/{s.early_mean[1]:<9.2f}"
                f"  {s.final_mean[0]:>9.2f}/{s.final_mean[1]:<9.2f}  {s.final_goal_rate[0]:.3f}/{s.final_goal_rate[1]:.3f}"
            )
        eg, be = self.count("earlier_goal"), self.count("better_early")
        eda_ok, a3ps_ok = self.sparse_counts()
        out.append(f"earlier first goal: {eg}/{n} -> {'WIN' if eg >= need else 'LOSS'}")
        out.append(f"higher early smoothed reward: {be}/{n} -> {'WIN' if be >= need else 'LOSS'}")
        out.append(
            f"final goal rate, sparse-reward check (eda <= 5%: {eda_ok}/{n}, a3ps >= 50%: {a3ps_ok}/{n}) -> "
            f"{'WIN' if eda_ok >= need and a3ps_ok >= need else 'LOSS'}"
        )
        return "\n".join(out) + "\n"


def compare_runs(a3ps: dict[int, list], eda: dict[int, list], window: int = 100, final: int = 500) -> ComparisonReport:
    """Per-seed comparison of two log sets keyed by seed."""
    if sorted(a3ps) != sorted(eda):
        raise ContractError(f"seed sets differ: {sorted(a3ps)} vs {sorted(eda)}")
    rows = []
    for seed in sorted(a3ps):
        a, e = list(a3ps[seed]), list(eda[seed])
        if len(a) != len(e) or not a:
            raise ContractError(f"seed {seed}: episode counts differ ({len(a)} vs {len(e)})")
        sa = smooth_curve([x.reward for x in a], window)
        se = smooth_curve([x.reward for x in e], window)
        third = max(1, len(a) // 3)
        rows.append(SeedComparison(
            seed,
            (first_goal(a), first_goal(e)),
            (float(sa[:third].mean()), float(se[:third].mean())),
            (float(sa[-final:].mean()), float(se[-final:].mean())),
            (goal_rate(a, final), goal_rate(e, final)),
        ))
    return ComparisonReport(tuple(rows), final)
