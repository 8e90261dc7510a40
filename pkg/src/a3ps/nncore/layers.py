from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from a3ps.nncore import tensor as T
from a3ps.nncore.tensor import Parameter, Tensor


class Module:
    """Container that discovers Parameters and sub-Modules from its attributes."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            path = f"{prefix}{attr}"
            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        named = dict(self.named_parameters())
        missing = set(named) - set(state)
        if missing:
            raise KeyError(f"checkpoint lacks parameters: {sorted(missing)}")
        for name, p in named.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"{name}: checkpoint shape {arr.shape} != model shape {p.shape}")
            p.data = arr.copy()


def uniform_init(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, zero: bool = False):
        if zero:
            w, b = np.zeros((n_in, n_out)), np.zeros(n_out)
        else:
            w, b = uniform_init(rng, n_in, (n_in, n_out)), uniform_init(rng, n_in, (n_out,))
        self.weight = Parameter(w, "weight")
        self.bias = Parameter(b, "bias")

    def __call__(self, x) -> Tensor:
        return T.affine(x, self.weight, self.bias)


class Embedding(Module):
    def __init__(self, n_rows: int, dim: int, rng: np.random.Generator):
        self.table = Parameter(rng.normal(0.0, 0.1, size=(n_rows, dim)), "table")

    def __call__(self, indices) -> Tensor:
        return T.embed(self.table, indices)


class GRU(Module):
    """Single-layer gated recurrent cell."""

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator):
        self.hidden = hidden
        self.w_input = Parameter(uniform_init(rng, hidden, (n_in, 3 * hidden)), "w_input")
        self.w_hidden = Parameter(uniform_init(rng, hidden, (hidden, 3 * hidden)), "w_hidden")
        self.b_input = Parameter(uniform_init(rng, hidden, (3 * hidden,)), "b_input")
        self.b_hidden = Parameter(uniform_init(rng, hidden, (3 * hidden,)), "b_hidden")

    def step(self, x, h, mask=None) -> Tensor:
        return T.gru_step(x, h, self.w_input, self.w_hidden, self.b_input, self.b_hidden, mask)

    def __call__(self, sequence, mask: np.ndarray | None = None) -> Tensor:
        return recur(self, sequence, mask)


def recur(cell: GRU, sequence: Sequence[Tensor] | Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Run ``cell`` over ``sequence`` (time-major) from a zero state; return the last hidden state.

    ``mask`` has shape (time, batch); masked steps leave the state untouched.
    """
    steps = [T.index(sequence, t) for t in range(sequence.shape[0])] if isinstance(sequence, Tensor) else list(sequence)
    if not steps:
        raise ValueError("recur needs at least one step")
    batch = steps[0].shape[0]
    h: Tensor = Tensor(np.zeros((batch, cell.hidden)))
    for t, x in enumerate(steps):
        h = cell.step(x, h, None if mask is None else mask[t])
    return h


def patchify(images: np.ndarray, patch: int) -> np.ndarray:
    """Cut (N, H, W, C) images into non-overlapping ``patch``-sized tiles.

    Returns (N, n_patches, patch*patch*C); trailing rows/cols that do not fill a
    tile are dropped.
    """
    n, h, w, c = images.shape
    ph, pw = h // patch, w // patch
    x = images[:, : ph * patch, : pw * patch, :].reshape(n, ph, patch, pw, patch, c)
    return x.transpose(0, 1, 3, 2, 4, 5).reshape(n, ph * pw, patch * patch * c)


class PatchEncoder(Module):
    """Strided-patch affine encoder for pixel observations.

    Each tile is projected by a shared affine map, passed through ReLU, and
    the tile features are averaged into one embedding per image.
    """

    def __init__(self, patch: int, channels: int, dim: int, rng: np.random.Generator):
        self.patch = patch
        self.proj = Linear(patch * patch * channels, dim, rng)

    def __call__(self, images: np.ndarray) -> Tensor:
        tiles = patchify(np.asarray(images, dtype=np.float64), self.patch)
        n, k, d = tiles.shape
        feats = T.relu(self.proj(tiles.reshape(n * k, d)))
        return T.mean(T.reshape(feats, (n, k, -1)), axis=1)
