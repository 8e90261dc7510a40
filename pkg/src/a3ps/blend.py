"""Blending advice-driven and experience-driven action scores under a decaying weight."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from a3ps.env.core import Action
from a3ps.errors import ConfigError, ContractError, NumericError
from a3ps.nncore.tensor import softmax_np


@dataclass(frozen=True)
class AlphaSchedule:
    """Step decay: ``alpha0`` drops by ``decay_step`` every ``decay_interval`` episodes."""

    alpha0: float = 0.6
    decay_step: float = 0.2
    decay_interval: int = 2000
    floor: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.floor <= self.alpha0 <= 1.0:
            raise ConfigError(f"need 0 <= floor <= alpha0 <= 1 (got floor={self.floor}, alpha0={self.alpha0})")
        if self.decay_step < 0 or self.decay_interval < 1:
            raise ConfigError("decay_step must be >= 0 and decay_interval >= 1")

    @property
    def zero_from(self) -> int | None:
        """First episode with alpha == floor, or None if the floor is never reached."""
        if self.decay_step == 0:
            return None if self.alpha0 > self.floor else 0
        k = 0
        while alpha_at(self, k * self.decay_interval) > self.floor:
            k += 1
        return k * self.decay_interval


def alpha_at(schedule: AlphaSchedule, episode: int) -> float:
    if episode < 0:
        raise ContractError(f"episode must be >= 0 (got {episode})")
    raw = schedule.alpha0 - schedule.decay_step * (episode // schedule.decay_interval)
    # rounding keeps 0.6 - 2 * 0.2 at 0.2 rather than 0.19999999999999996
    return max(schedule.floor, round(raw, 12)) + 0.0


def _scores(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1:] != (len(Action),):
        raise ContractError(f"{name} must have {len(Action)} entries per row, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise NumericError(f"{name} contains NaN or Inf")
    return arr


def blend_logits(a_adv, a_exp, alpha: float) -> np.ndarray:
    if not 0.0 <= alpha <= 1.0:
        raise ContractError(f"alpha must lie in [0, 1] (got {alpha})")
    return alpha * _scores(a_adv, "a_adv") + (1.0 - alpha) * _scores(a_exp, "a_exp")


def blend(a_adv, a_exp, alpha: float) -> np.ndarray:
    """``softmax(alpha * a_adv + (1 - alpha) * a_exp)``; accepts single rows or batches."""
    return softmax_np(blend_logits(a_adv, a_exp, alpha))


def check_distribution(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (len(Action),):
        raise ContractError(f"expected a length-{len(Action)} distribution, got shape {p.shape}")
    if not np.isfinite(p).all() or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ContractError(f"not a probability distribution: {p.tolist()}")
    return p


def select_action(probabilities, mode: str = "sample", rng: np.random.Generator | None = None) -> Action:
    p = check_distribution(probabilities)
    if mode == "greedy":
        return Action(int(np.argmax(p)))
    if mode != "sample":
        raise ContractError(f"unknown selection mode {mode!r}")
    if rng is None:
        raise ContractError("sample mode needs a seeded generator")
    cdf = np.cumsum(p)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return Action(min(idx, len(p) - 1))
