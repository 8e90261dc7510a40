from __future__ import annotations

from typing import Callable

import numpy as np

from a3ps.nncore.tensor import Parameter, Tensor, backward, no_recording, recording


def gradient_check(
    loss_fn: Callable[[], Tensor],
    params: list[Parameter],
    h: float = 1e-5,
    max_coords: int = 10_000,
    rng: np.random.Generator | None = None,
    floor: float = 1e-5,
) -> float:
    """Largest relative gap between tape gradients and central differences.

    ``loss_fn`` must rebuild the scalar loss from the current parameter values.
    Per coordinate the error is ``|a - n| / max(|a| + |n|, floor)``.  Above
    ``max_coords`` total coordinates a random subsample is checked.
    """
    for p in params:
        p.zero_grad()
    with recording():
        backward(loss_fn())
    analytic = [p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()

    coords = [(i, j) for i, p in enumerate(params) for j in range(p.size)]
    if len(coords) > max_coords:
        rng = rng or np.random.default_rng(0)
        pick = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[k] for k in np.sort(pick)]

    worst = 0.0
    with no_recording():
        for i, j in coords:
            flat = params[i].data.flat
            old = flat[j]
            flat[j] = old + h
            up = loss_fn().item()
            flat[j] = old - h
            down = loss_fn().item()
            flat[j] = old
            numeric = (up - down) / (2.0 * h)
            a = analytic[i].reshape(-1)[j]
            worst = max(worst, abs(a - numeric) / max(abs(a) + abs(numeric), floor))
    return worst
