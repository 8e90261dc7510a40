"""Exhaustive value iteration over the reachable Frogger state space.

A state is keyed by ``(row, col, car phase, visited bitmask)``; the step
counter is ignored, so timeouts are not part of the planning problem.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from a3ps.env.config import EnvConfig, RewardConfig
from a3ps.env.core import Action, GridState, _transition, canonical, car_positions, initial_state
from a3ps.errors import CapacityError, ContractError

StateKey = tuple[int, int, int, int]
TIE_TOL = 1e-9


def state_key(config: EnvConfig, state: GridState) -> StateKey:
    return (state.agent[0], state.agent[1], state.tick % config.cycle, state.visited_rows)


def enumerate_reachable(config: EnvConfig, reward_cfg: RewardConfig, max_states: int = 1_000_000):
    """Breadth-first enumeration of non-terminal states reachable from the start.

    Returns ``(states, index, next_index, rewards)`` where ``next_index[s, a]`` is -1
    for transitions that end the episode.
    """
    config.validate()
    if config.random_phase:
        roots = [GridState(config.start, car_positions(config, ph), 1, ph) for ph in range(config.cycle)]
    else:
        roots = [canonical(config, initial_state(config))]
    index: dict[StateKey, int] = {}
    states: list[GridState] = []
    for root in roots:
        index[state_key(config, root)] = len(states)
        states.append(root)
    queue = deque(range(len(states)))
    pending: dict[int, list[tuple[StateKey | None, float]]] = {}
    while queue:
        i = queue.popleft()
        row = []
        for a in Action:
            out = _transition(config, states[i], a, reward_cfg, timeout=False)
            if out.terminal:
                row.append((None, out.reward))
                continue
            nxt = canonical(config, out.next_state)
            key = state_key(config, nxt)
            if key not in index:
                if len(states) >= max_states:
                    raise CapacityError(f"reachable state space exceeds {max_states} states")
                index[key] = len(states)
                states.append(nxt)
                queue.append(index[key])
            row.append((key, out.reward))
        pending[i] = row
    n = len(states)
    next_index = np.full((n, len(Action)), -1, dtype=np.int64)
    rewards = np.zeros((n, len(Action)))
    for i, row in pending.items():
        for a, (key, rew) in enumerate(row):
            rewards[i, a] = rew
            if key is not None:
                next_index[i, a] = index[key]
    return states, index, next_index, rewards


@dataclass
class OraclePolicy:
    config: EnvConfig
    reward_cfg: RewardConfig
    gamma: float
    states: list[GridState]
    index: dict[StateKey, int]
    q: np.ndarray
    values: np.ndarray
    actions: np.ndarray
    sweeps: int

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, state: GridState) -> bool:
        return state_key(self.config, state) in self.index

    def _idx(self, state: GridState) -> int:
        try:
            return self.index[state_key(self.config, state)]
        except KeyError:
            raise KeyError(f"state {state_key(self.config, state)} is not in the enumerated space") from None

    def action(self, state: GridState) -> Action:
        return Action(int(self.actions[self._idx(state)]))

    def value(self, state: GridState) -> float:
        return float(self.values[self._idx(state)])

    def __getitem__(self, key: StateKey) -> tuple[Action, float]:
        i = self.index[key]
        return Action(int(self.actions[i])), float(self.values[i])

    def as_dict(self) -> dict[StateKey, tuple[Action, float]]:
        return {k: (Action(int(self.actions[i])), float(self.values[i])) for k, i in self.index.items()}


def greedy_actions(q: np.ndarray) -> np.ndarray:
    """Lowest-index action among those within TIE_TOL of the best Q-value."""
    best = q.max(axis=1, keepdims=True)
    return np.argmax(q >= best - TIE_TOL, axis=1)


def oracle_policy(
    config: EnvConfig,
    reward_cfg: RewardConfig,
    horizon: int = 100_000,
    gamma: float = 0.99,
    tol: float = 1e-9,
    max_states: int = 1_000_000,
) -> OraclePolicy:
    """Solve the configured MDP by value iteration.

    ``horizon`` caps the number of Bellman sweeps; the iteration stops once
    the largest value change falls below ``tol``.
    """
    if not 0 < gamma < 1:
        raise ContractError(f"gamma must lie in (0, 1) for value iteration (got {gamma})")
    states, index, nxt, rew = enumerate_reachable(config, reward_cfg, max_states)
    live = nxt >= 0
    safe = np.where(live, nxt, 0)
    v = np.zeros(len(states))
    for sweep in range(1, horizon + 1):
        q = rew + gamma * np.where(live, v[safe], 0.0)
        new_v = q.max(axis=1)
        delta = np.abs(new_v - v).max()
        v = new_v
        if delta < tol:
            break
    else:
        raise ContractError(f"value iteration did not converge within {horizon} sweeps (last change {delta:.3g})")
    q = rew + gamma * np.where(live, v[safe], 0.0)
    return OraclePolicy(config, reward_cfg, gamma, states, index, q, v, greedy_actions(q), sweep)


def greedy_rollout(oracle: OraclePolicy, max_steps: int | None = None):
    """Follow the oracle from the start state; returns the list of StepOutcomes."""
    config = oracle.config
    state = initial_state(config)
    limit = max_steps or config.max_steps
    outcomes = []
    for _ in range(limit):
        out = _transition(config, state, oracle.action(canonical(config, state)), oracle.reward_cfg, timeout=False)
        outcomes.append(out)
        if out.terminal:
            break
        state = out.next_state
    return outcomes
