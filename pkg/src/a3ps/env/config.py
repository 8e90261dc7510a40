from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

from a3ps.errors import ConfigError

# (direction, period, initial columns) cycled over rows 1..rows-1
_LANE_PATTERN = (
    (-1, 2, (1, 6)),
    (1, 3, (0, 4)),
    (-1, 3, (3, 8)),
    (1, 2, (5,)),
    (-1, 2, (2, 7)),
    (1, 3, (1, 5)),
    (-1, 2, (0, 4)),
)


@dataclass(frozen=True)
class LaneSpec:
    """Cars in one row.  ``direction`` is -1 (leftward), +1 (rightward) or 0 (parked).

    A car starting at column ``c0`` sits at ``(c0 + direction * (tick // period)) % cols``.
    """

    row: int
    direction: int
    period: int
    offsets: tuple[int, ...]


def default_lanes(rows: int, cols: int) -> tuple[LaneSpec, ...]:
    lanes = []
    for r in range(1, rows):
        d, p, offs = _LANE_PATTERN[(r - 1) % len(_LANE_PATTERN)]
        lanes.append(LaneSpec(r, d, p, tuple(sorted({o % cols for o in offs}))))
    return tuple(lanes)


@dataclass(frozen=True)
class EnvConfig:
    """Frogger geometry.

    Rows ``0..rows-1`` are the traversal band (row 0 is the start row) and
    row ``rows`` is the goal row.  ``tunnel_cols`` defaults to every column
    except column 1; ``lanes`` defaults to :func:`default_lanes`.
    """

    rows: int = 8
    cols: int = 9
    tunnel_row: int | None = None
    tunnel_cols: frozenset[int] | None = None
    lanes: tuple[LaneSpec, ...] | None = None
    max_steps: int = 50
    seed: int = 0
    random_phase: bool = False

    def __post_init__(self) -> None:
        if self.tunnel_row is None:
            object.__setattr__(self, "tunnel_row", self.rows // 2)
        if self.tunnel_cols is None:
            object.__setattr__(self, "tunnel_cols", frozenset(c for c in range(self.cols) if c != 1))
        else:
            object.__setattr__(self, "tunnel_cols", frozenset(self.tunnel_cols))
        if self.lanes is None:
            object.__setattr__(self, "lanes", default_lanes(self.rows, max(self.cols, 1)))
        else:
            object.__setattr__(self, "lanes", tuple(
                lane if isinstance(lane, LaneSpec) else LaneSpec(lane[0], lane[1], lane[2], tuple(lane[3]))
                for lane in self.lanes
            ))

    @property
    def goal_row(self) -> int:
        return self.rows

    @property
    def start(self) -> tuple[int, int]:
        return (0, self.cols // 2)

    @property
    def cycle(self) -> int:
        """Ticks after which every car is back at its starting cell."""
        out = 1
        for lane in self.lanes:
            if lane.direction and lane.offsets:
                out = math.lcm(out, lane.period * self.cols)
        return out

    @property
    def tunnel_gaps(self) -> tuple[int, ...]:
        return tuple(c for c in range(self.cols) if c not in self.tunnel_cols)

    def validate(self) -> "EnvConfig":
        if self.rows < 2:
            raise ConfigError(f"rows must be >= 2 (got {self.rows})")
        if self.cols < 3:
            raise ConfigError(f"cols must be >= 3 (got {self.cols})")
        if not 0 < self.tunnel_row < self.rows:
            raise ConfigError(f"tunnel_row must lie strictly inside the traversal band 1..{self.rows - 1} (got {self.tunnel_row})")
        if not self.tunnel_cols:
            raise ConfigError("tunnel_cols must be nonempty")
        if not self.tunnel_cols < frozenset(range(self.cols)):
            raise ConfigError("tunnel_cols must be a strict subset of the grid columns")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1 (got {self.max_steps})")
        seen = set()
        for lane in self.lanes:
            if not 1 <= lane.row < self.rows:
                raise ConfigError(f"lane row {lane.row} outside 1..{self.rows - 1}")
            if lane.row in seen:
                raise ConfigError(f"duplicate lane for row {lane.row}")
            seen.add(lane.row)
            if lane.period < 1:
                raise ConfigError(f"lane {lane.row}: period must be >= 1 (got {lane.period})")
            if lane.direction not in (-1, 0, 1):
                raise ConfigError(f"lane {lane.row}: direction must be -1, 0 or 1")
            if any(not 0 <= o < self.cols for o in lane.offsets) or len(set(lane.offsets)) != len(lane.offsets):
                raise ConfigError(f"lane {lane.row}: offsets must be distinct columns in 0..{self.cols - 1}")
        return self

    def without_cars(self) -> "EnvConfig":
        return replace(self, lanes=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tunnel_cols"] = sorted(self.tunnel_cols)
        d["lanes"] = [[l.row, l.direction, l.period, list(l.offsets)] for l in self.lanes]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        d = dict(d)
        if d.get("tunnel_cols") is not None:
            d["tunnel_cols"] = frozenset(d["tunnel_cols"])
        if d.get("lanes") is not None:
            d["lanes"] = tuple(LaneSpec(int(a), int(b), int(c), tuple(int(x) for x in offs)) for a, b, c, offs in d["lanes"])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown env keys: {sorted(unknown)}")
        return cls(**d)


class RewardMode(str, Enum):
    DENSE = "dense"
    SPARSE = "sparse"


@dataclass(frozen=True)
class RewardConfig:
    """Per-event reward values.  ``row_first_visit`` is keyed by row index
    (row 0 is the start row, so the second row is index 1)."""

    goal: float = 400.0
    row_first_visit: dict[int, float] = field(default_factory=lambda: {1: 10.0})
    tunnel_pass: float = 100.0
    level_up: float = 1.0
    wait_start: float = -5.0
    wait_other: float = -1.0
    blocked: float = -2.0
    collision: float = -20.0
    mode: RewardMode = RewardMode.DENSE

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", RewardMode(self.mode))
        object.__setattr__(self, "row_first_visit", {int(k): float(v) for k, v in self.row_first_visit.items()})

    def __hash__(self) -> int:
        return hash((self.effective_tuple(), self.mode))

    @classmethod
    def dense(cls) -> "RewardConfig":
        return cls()

    @classmethod
    def sparse(cls) -> "RewardConfig":
        return cls(mode=RewardMode.SPARSE)

    @property
    def is_sparse(self) -> bool:
        return self.mode is RewardMode.SPARSE

    def first_visit(self, row: int) -> float:
        return 0.0 if self.is_sparse else self.row_first_visit.get(row, 0.0)

    def effective(self, name: str) -> float:
        if self.is_sparse and name not in ("goal", "collision"):
            return 0.0
        return getattr(self, name)

    def effective_tuple(self) -> tuple:
        return tuple(
            (k, self.effective(k))
            for k in ("goal", "tunnel_pass", "level_up", "wait_start", "wait_other", "blocked", "collision")
        ) + tuple(sorted((r, self.first_visit(r)) for r in self.row_first_visit))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        d["row_first_visit"] = {str(k): v for k, v in sorted(self.row_first_visit.items())}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RewardConfig":
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown reward keys: {sorted(unknown)}")
        return cls(**d)
