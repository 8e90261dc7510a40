"""Flat-colour 100x100 RGB rendering for the optional pixel observation mode."""
from __future__ import annotations

import numpy as np

from a3ps.env.config import EnvConfig

SIZE = 100
ROAD = (40, 40, 40)
START = (70, 120, 70)
GOAL = (60, 90, 200)
TUNNEL = (130, 130, 130)
AGENT = (60, 220, 60)
CAR_LEFT = (220, 50, 50)
CAR_RIGHT = (240, 160, 30)


def _edges(n: int) -> np.ndarray:
    return np.linspace(0, SIZE, n + 1).round().astype(int)


def render(config: EnvConfig, state) -> np.ndarray:
    img = np.empty((SIZE, SIZE, 3), dtype=np.uint8)
    img[:] = ROAD
    ys = _edges(config.rows + 1)
    xs = _edges(config.cols)

    def cell(r, c, color, inset=0):
        # row 0 is drawn at the bottom of the image
        top = SIZE - ys[r + 1]
        bottom = SIZE - ys[r]
        img[top + inset : bottom - inset, xs[c] + inset : xs[c + 1] - inset] = color

    for c in range(config.cols):
        cell(0, c, START)
        cell(config.goal_row, c, GOAL)
    for c in config.tunnel_cols:
        cell(config.tunnel_row, c, TUNNEL)
    for r, c, d in state.cars:
        cell(r, c, CAR_LEFT if d < 0 else CAR_RIGHT, inset=1)
    cell(state.agent[0], state.agent[1], AGENT, inset=2)
    return img
