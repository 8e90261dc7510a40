"""Deterministic Frogger transitions, rewards and observations.

Row 0 is the start row at the bottom; ``Up`` increases the row index.
Car positions are a pure function of the tick, so a state's car layout is
fully determined by ``tick % config.cycle``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from enum import Enum, IntEnum

import numpy as np

from a3ps.env.config import EnvConfig, RewardConfig
from a3ps.errors import ContractError

N_CHANNELS = 5
CH_AGENT, CH_CAR_LEFT, CH_CAR_RIGHT, CH_TUNNEL, CH_GOAL = range(N_CHANNELS)
HISTORY = 3


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    NOOP = 4


MOVES = {
    Action.UP: (1, 0),
    Action.DOWN: (-1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
    Action.NOOP: (0, 0),
}


class EventKind(str, Enum):
    FIRST_VISIT = "reached_row_first_time"
    PASSED_TUNNEL = "passed_tunnel"
    REACHED_GOAL = "reached_goal"
    COLLISION = "collision"
    BLOCKED_SIDE = "blocked_by_side"
    BLOCKED_TUNNEL = "blocked_by_tunnel"
    WAITED = "waited"
    LEVEL_UP = "level_up"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    row: int | None = None


@dataclass(frozen=True)
class GridState:
    agent: tuple[int, int]
    cars: tuple[tuple[int, int, int], ...]
    visited_rows: int  # bitmask, bit r set once row r has been entered
    tick: int
    steps: int = 0
    terminal: str | None = None  # "goal" | "collision" | "timeout"

    @property
    def visited(self) -> frozenset[int]:
        return frozenset(r for r in range(self.visited_rows.bit_length()) if self.visited_rows >> r & 1)

    @property
    def max_row(self) -> int:
        return self.visited_rows.bit_length() - 1


@dataclass(frozen=True)
class StepOutcome:
    next_state: GridState
    reward: float
    terminal: bool
    events: frozenset[Event]

    def has(self, kind: EventKind) -> bool:
        return any(e.kind is kind for e in self.events)


@dataclass
class Observation:
    frames: np.ndarray  # (4, rows+1 * cols * channels), oldest first
    goal_vector: np.ndarray  # (rows,)
    pixels: np.ndarray | None = None  # (4, 100, 100, 3) uint8 in pixel mode


def car_positions(config: EnvConfig, tick: int) -> tuple[tuple[int, int, int], ...]:
    cars = []
    for lane in config.lanes:
        shift = lane.direction * (tick // lane.period)
        for c0 in lane.offsets:
            cars.append((lane.row, (c0 + shift) % config.cols, lane.direction))
    # lane/offset order, so index i is the same car at every tick
    return tuple(cars)


def reward_of(events, cfg: RewardConfig) -> float:
    total = 0.0
    for e in events:
        k = e.kind
        if k is EventKind.REACHED_GOAL:
            total += cfg.effective("goal")
        elif k is EventKind.FIRST_VISIT:
            total += cfg.first_visit(e.row)
        elif k is EventKind.PASSED_TUNNEL:
            total += cfg.effective("tunnel_pass")
        elif k is EventKind.LEVEL_UP:
            total += cfg.effective("level_up")
        elif k is EventKind.WAITED:
            total += cfg.effective("wait_start") if e.row == 0 else cfg.effective("wait_other")
        elif k in (EventKind.BLOCKED_SIDE, EventKind.BLOCKED_TUNNEL):
            total += cfg.effective("blocked")
        elif k is EventKind.COLLISION:
            total += cfg.effective("collision")
    return total


def initial_state(config: EnvConfig, seed: int = 0) -> GridState:
    tick = 0
    if config.random_phase:
        tick = int(np.random.default_rng(seed).integers(config.cycle))
    return GridState(config.start, car_positions(config, tick), 1, tick)


def reset(config: EnvConfig, reward_cfg: RewardConfig, seed: int = 0) -> tuple[GridState, Observation]:
    config.validate()
    state = initial_state(config, seed)
    return state, observe(config, state, ())


def step(config: EnvConfig, state: GridState, action: Action | int, reward_cfg: RewardConfig) -> StepOutcome:
    return _transition(config, state, Action(action), reward_cfg, timeout=True)


def _transition(config: EnvConfig, state: GridState, action: Action, reward_cfg: RewardConfig, timeout: bool) -> StepOutcome:
    if state.terminal is not None:
        raise ContractError(f"step called on a terminal state ({state.terminal})")
    r, c = state.agent
    dr, dc = MOVES[action]
    events: list[Event] = []
    nr, nc = r, c
    if action is Action.NOOP:
        events.append(Event(EventKind.WAITED, r))
    elif not (0 <= c + dc < config.cols) or r + dr < 0:
        events.append(Event(EventKind.BLOCKED_SIDE))
    elif r + dr == config.tunnel_row and c + dc in config.tunnel_cols:
        events.append(Event(EventKind.BLOCKED_TUNNEL))
    else:
        nr, nc = r + dr, c + dc
        if dr == 1:
            events.append(Event(EventKind.LEVEL_UP))

    tick = state.tick + 1
    cars = car_positions(config, tick)
    visited = state.visited_rows
    if nr < config.rows and not visited >> nr & 1:
        visited |= 1 << nr
        events.append(Event(EventKind.FIRST_VISIT, nr))
        if nr == config.tunnel_row:
            events.append(Event(EventKind.PASSED_TUNNEL))

    terminal = None
    if nr == config.goal_row:
        events.append(Event(EventKind.REACHED_GOAL))
        terminal = "goal"
    elif _collides(state.cars, cars, (r, c), (nr, nc)):
        events.append(Event(EventKind.COLLISION))
        terminal = "collision"
    elif timeout and state.steps + 1 >= config.max_steps:
        terminal = "timeout"

    nxt = GridState((nr, nc), cars, visited, tick, state.steps + 1, terminal)
    evs = frozenset(events)
    return StepOutcome(nxt, reward_of(evs, reward_cfg), terminal is not None, evs)


def _collides(old_cars, new_cars, old_pos, new_pos) -> bool:
    row = new_pos[0]
    for (cr, cc, _), (_, nc_, _) in zip(old_cars, new_cars):
        if cr != row:
            continue
        if (cr, nc_) == new_pos:
            return True
        # agent and car swap cells within one tick
        if (cr, cc) == new_pos and (cr, nc_) == old_pos:
            return True
    return False


def frame_features(config: EnvConfig, state: GridState) -> np.ndarray:
    """One (rows+1, cols, channels) 0/1 feature grid."""
    g = np.zeros((config.rows + 1, config.cols, N_CHANNELS))
    g[state.agent[0], state.agent[1], CH_AGENT] = 1.0
    for r, c, d in state.cars:
        if d <= 0:
            g[r, c, CH_CAR_LEFT] = 1.0
        if d >= 0:
            g[r, c, CH_CAR_RIGHT] = 1.0
    for c in config.tunnel_cols:
        g[config.tunnel_row, c, CH_TUNNEL] = 1.0
    g[config.goal_row, :, CH_GOAL] = 1.0
    return g


def goal_vector(config: EnvConfig, state: GridState) -> np.ndarray:
    return np.array([float(state.visited_rows >> r & 1) for r in range(config.rows)])


def observe(config: EnvConfig, state: GridState, history=(), pixels: bool = False) -> Observation:
    """Stack the last four frames (oldest first), padding with the oldest one available."""
    seq = list(history)[-HISTORY:] + [state]
    seq = [seq[0]] * (HISTORY + 1 - len(seq)) + seq
    frames = np.stack([frame_features(config, s).reshape(-1) for s in seq])
    pix = None
    if pixels:
        from a3ps.env.render import render

        pix = np.stack([render(config, s) for s in seq])
    return Observation(frames, goal_vector(config, state), pix)


def frame_size(config: EnvConfig) -> int:
    return (config.rows + 1) * config.cols * N_CHANNELS


class FroggerEnv:
    """Stateful episode wrapper over the pure transition functions.

    Frames are cached per ``(agent, car phase)`` since they do not depend on
    anything else.
    """

    def __init__(self, config: EnvConfig, reward_cfg: RewardConfig, seed: int = 0, pixels: bool = False):
        self.config = config.validate()
        self.reward_cfg = reward_cfg
        self.seed = seed
        self.pixels = pixels
        self.state: GridState | None = None
        self.history: deque[GridState] = deque(maxlen=HISTORY)
        self._frames: dict[tuple, np.ndarray] = {}
        self.episodes = 0

    def _frame(self, s: GridState) -> np.ndarray:
        key = (s.agent, s.tick % self.config.cycle)
        f = self._frames.get(key)
        if f is None:
            f = frame_features(self.config, s).reshape(-1)
            self._frames[key] = f
        return f

    def observation(self) -> Observation:
        if self.pixels:
            return observe(self.config, self.state, self.history, pixels=True)
        seq = list(self.history) + [self.state]
        seq = [seq[0]] * (HISTORY + 1 - len(seq)) + seq
        frames = np.stack([self._frame(s) for s in seq])
        return Observation(frames, goal_vector(self.config, self.state))

    def reset(self) -> Observation:
        self.state = initial_state(self.config, self.seed + self.episodes)
        self.history.clear()
        return self.observation()

    def step(self, action: int) -> tuple[Observation, float, bool, StepOutcome]:
        out = step(self.config, self.state, action, self.reward_cfg)
        self.history.append(self.state)
        self.state = out.next_state
        if out.terminal:
            self.episodes += 1
        return self.observation(), out.reward, out.terminal, out

    def snapshot(self) -> dict:
        return {
            "state": state_to_dict(self.state) if self.state is not None else None,
            "history": [state_to_dict(s) for s in self.history],
            "episodes": self.episodes,
        }

    def restore(self, snap: dict) -> None:
        self.state = state_from_dict(snap["state"]) if snap["state"] is not None else None
        self.history = deque((state_from_dict(s) for s in snap["history"]), maxlen=HISTORY)
        self.episodes = snap["episodes"]


def state_to_dict(s: GridState) -> dict:
    return {
        "agent": list(s.agent),
        "cars": [list(c) for c in s.cars],
        "visited_rows": sorted(s.visited),
        "tick": s.tick,
        "steps": s.steps,
        "terminal": s.terminal,
    }


def state_from_dict(d: dict) -> GridState:
    visited = 0
    for r in d["visited_rows"]:
        visited |= 1 << int(r)
    return GridState(
        (int(d["agent"][0]), int(d["agent"][1])),
        tuple((int(a), int(b), int(c)) for a, b, c in d["cars"]),
        visited,
        int(d["tick"]),
        int(d.get("steps", 0)),
        d.get("terminal"),
    )


def canonical(config: EnvConfig, state: GridState) -> GridState:
    """Drop the step counter and reduce the tick to its car phase."""
    return replace(state, tick=state.tick % config.cycle, steps=0)
