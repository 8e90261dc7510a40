from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from a3ps.errors import ContractError
from a3ps.nncore.tensor import Parameter


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Parameter], lr: float, **kw) -> "AdamState":
        return cls(
            lr=lr,
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
            **kw,
        )

    def copy(self) -> "AdamState":
        return AdamState(self.lr, self.beta1, self.beta2, self.eps, self.step,
                         [a.copy() for a in self.m], [a.copy() for a in self.v])


def adam_step(params: list[Parameter], state: AdamState) -> None:
    """Apply one bias-corrected Adam update in place, then zero the gradients."""
    if len(state.m) != len(params):
        raise ContractError(f"optimizer tracks {len(state.m)} tensors but got {len(params)} parameters")
    for p, m in zip(params, state.m):
        if p.grad is None:
            raise ContractError(f"parameter {p.name!r} has no gradient")
        if m.shape != p.shape:
            raise ContractError(f"accumulator shape {m.shape} != parameter {p.name!r} shape {p.shape}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for i, p in enumerate(params):
        g = p.grad
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        p.data = p.data - state.lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + state.eps)
        p.zero_grad()


def checksum(params: list[Parameter]) -> str:
    h = hashlib.sha256()
    for p in params:
        h.update(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    return h.hexdigest()
