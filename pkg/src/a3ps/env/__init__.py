"""Deterministic Frogger MDP, observations and the value-iteration oracle."""
from a3ps.env.config import EnvConfig, LaneSpec, RewardConfig, RewardMode, default_lanes
from a3ps.env.core import (
    MOVES,
    Action,
    Event,
    EventKind,
    FroggerEnv,
    GridState,
    Observation,
    StepOutcome,
    canonical,
    car_positions,
    frame_features,
    frame_size,
    goal_vector,
    initial_state,
    observe,
    reset,
    reward_of,
    state_from_dict,
    state_to_dict,
    step,
)
from a3ps.env.oracle import OraclePolicy, enumerate_reachable, greedy_rollout, oracle_policy, state_key
from a3ps.env.render import render

__all__ = [
    "MOVES", "Action", "EnvConfig", "Event", "EventKind", "FroggerEnv", "GridState", "LaneSpec",
    "Observation", "OraclePolicy", "RewardConfig", "RewardMode", "StepOutcome", "canonical",
    "car_positions", "default_lanes", "enumerate_reachable", "frame_features", "frame_size",
    "goal_vector", "greedy_rollout", "initial_state", "observe", "oracle_policy", "render", "reset",
    "reward_of", "state_from_dict", "state_key", "state_to_dict", "step",
]
