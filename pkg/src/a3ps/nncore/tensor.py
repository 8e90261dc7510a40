"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations are recorded on the active :class:`Tape` (see :func:`recording`)
only when at least one operand requires a gradient.  Outside a recording
context every op is plain numpy arithmetic wrapped in a :class:`Tensor`,
which is what inference paths rely on for speed.
"""
from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterator, Sequence

import numpy as np

from a3ps.errors import ContractError, NumericError, ShapeError

LOGIT_CLAMP = 80.0

_TAPE: "Tape | None" = None


class Tape:
    def __init__(self) -> None:
        self.nodes: list[Tensor] = []

    def add(self, t: "Tensor") -> None:
        t.node_id = len(self.nodes)
        t._tape = self
        self.nodes.append(t)

    def clear(self) -> None:
        for t in self.nodes:
            t._tape = None
            t.node_id = None
            t._parents = ()
            t._backward = None
        self.nodes = []

    def __len__(self) -> int:
        return len(self.nodes)


@contextmanager
def recording() -> Iterator[Tape]:
    """Activate a fresh tape for the duration of the block."""
    global _TAPE
    prev = _TAPE
    _TAPE = Tape()
    try:
        yield _TAPE
    finally:
        _TAPE.clear()
        _TAPE = prev


@contextmanager
def no_recording() -> Iterator[None]:
    global _TAPE
    prev = _TAPE
    _TAPE = None
    try:
        yield
    finally:
        _TAPE = prev


def is_recording() -> bool:
    return _TAPE is not None


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "node_id", "_parents", "_backward", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64) if not isinstance(data, np.ndarray) else data
        if arr.dtype != np.float64:
            arr = arr.astype(np.float64)
        if not np.isfinite(arr).all():
            raise NumericError("tensor contains NaN or Inf")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.node_id: int | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        return self.data.ravel()

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """A trainable leaf tensor; its gradient buffer always matches its shape."""

    __slots__ = ("name",)

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    if not np.isfinite(data).all():
        raise NumericError(f"{op} produced NaN or Inf")
    out = Tensor.__new__(Tensor)
    out.data = data if data.dtype == np.float64 else data.astype(np.float64)
    out.grad = None
    out.requires_grad = False
    out.node_id = None
    out._parents = ()
    out._backward = None
    out._tape = None
    if _TAPE is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        _TAPE.add(out)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: operands of shape {a.shape} and {b.shape} do not broadcast") from None


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every gradient-requiring leaf, then clear the tape."""
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = loss._tape
    if tape is None or loss.node_id is None:
        raise ContractError("loss is not on an active tape")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes[: loss.node_id + 1]):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            if parent._tape is tape:
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg
            elif parent.grad is None:
                parent.grad = np.array(pg, dtype=np.float64)
            else:
                parent.grad = parent.grad + pg
    tape.clear()


# -- elementwise ----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return _result(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _result(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    ad, bd = a.data, b.data

    def bw(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _result(ad * bd, (a, b), bw, "mul")


def square(x) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    return _result(xd * xd, (x,), lambda g: (2.0 * xd * g,), "square")


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(np.clip(x.data, -700.0, 700.0))
    return _result(out, (x,), lambda g: (g * out,), "exp")


def log(x) -> Tensor:
    x = as_tensor(x)
    if (x.data <= 0).any():
        raise NumericError("log of non-positive value")
    xd = x.data
    return _result(np.log(xd), (x,), lambda g: (g / xd,), "log")


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return _result(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _result(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = _sigmoid(x.data)
    return _result(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def clip(x, lo: float, hi: float) -> Tensor:
    x = as_tensor(x)
    inside = (x.data >= lo) & (x.data <= hi)
    return _result(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,), "clip")


def minimum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "minimum")
    take_a = a.data <= b.data
    sa, sb = a.shape, b.shape

    def bw(g):
        return _unbroadcast(g * take_a, sa), _unbroadcast(g * ~take_a, sb)

    return _result(np.minimum(a.data, b.data), (a, b), bw, "minimum")


# -- reductions and shape -------------------------------------------------


def sum(x, axis: int | None = None) -> Tensor:  # noqa: A001 - mirrors numpy
    x = as_tensor(x)
    shape = x.shape

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _result(np.asarray(x.data.sum(axis=axis)), (x,), bw, "sum")


def mean(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)
    n = x.data.size if axis is None else x.shape[axis]
    return mul(sum(x, axis), 1.0 / n)


def reshape(x, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {old} as {shape}") from None
    return _result(out, (x,), lambda g: (g.reshape(old),), "reshape")


def index(x, i: int) -> Tensor:
    """Select entry ``i`` along the first axis."""
    x = as_tensor(x)
    shape = x.shape

    def bw(g):
        full = np.zeros(shape)
        full[i] = g
        return (full,)

    return _result(x.data[i], (x,), bw, "index")


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in ts]}") from None
    sizes = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _result(out, ts, lambda g: tuple(np.split(g, sizes, axis=axis)), "concat")


def pick(x, idx) -> Tensor:
    """Row-wise gather: ``out[i] = x[i, idx[i]]`` for a rank-2 ``x``."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    if x.ndim != 2 or idx.shape != (x.shape[0],):
        raise ShapeError(f"pick: x {x.shape} and indices {idx.shape} are incompatible")
    rows = np.arange(x.shape[0])
    shape = x.shape

    def bw(g):
        full = np.zeros(shape)
        full[rows, idx] = g
        return (full,)

    return _result(x.data[rows, idx], (x,), bw, "pick")


# -- linear algebra and layers --------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: left {a.shape} and right {b.shape} are incompatible")
    ad, bd = a.data, b.data
    return _result(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def affine(x, W, b) -> Tensor:
    """``x @ W + b`` for ``x`` of shape (batch, in) or (in,)."""
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if W.ndim != 2 or x.shape[-1] != W.shape[0] or x.ndim > 2:
        raise ShapeError(f"affine: input {x.shape} and weight {W.shape} are incompatible")
    if b.shape != (W.shape[1],):
        raise ShapeError(f"affine: bias {b.shape} does not match weight {W.shape}")
    xd, Wd = x.data, W.data

    def bw(g):
        if xd.ndim == 1:
            return g @ Wd.T, np.outer(xd, g), g
        return g @ Wd.T, xd.T @ g, g.sum(axis=0)

    return _result(xd @ Wd + b.data, (x, W, b), bw, "affine")


def embed(table, indices) -> Tensor:
    table = as_tensor(table)
    idx = np.asarray(indices, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"embed: table must be rank 2, got {table.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(f"embed: index out of range for table with {table.shape[0]} rows")
    shape = table.shape

    def bw(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return _result(table.data[idx], (table,), bw, "embed")


def gru_step(x, h, Wx, Wh, bx, bh, mask: np.ndarray | None = None) -> Tensor:
    """One gated recurrent update.

    Gates are laid out ``[reset | update | candidate]`` along the last axis of
    ``Wx``/``Wh``.  Rows with ``mask == 0`` keep their previous hidden state,
    which is how padded tokens are skipped.
    """
    x, h, Wx, Wh, bx, bh = (as_tensor(t) for t in (x, h, Wx, Wh, bx, bh))
    H = h.shape[-1]
    if Wx.shape != (x.shape[-1], 3 * H) or Wh.shape != (H, 3 * H):
        raise ShapeError(f"gru_step: input {x.shape}, hidden {h.shape}, Wx {Wx.shape}, Wh {Wh.shape}")
    xd, hd = x.data, h.data
    gx = xd @ Wx.data + bx.data
    gh = hd @ Wh.data + bh.data
    r = _sigmoid(gx[:, :H] + gh[:, :H])
    z = _sigmoid(gx[:, H : 2 * H] + gh[:, H : 2 * H])
    ghn = gh[:, 2 * H :]
    n = np.tanh(gx[:, 2 * H :] + r * ghn)
    out = (1.0 - z) * n + z * hd
    m = None
    if mask is not None:
        m = np.asarray(mask, dtype=np.float64).reshape(-1, 1)
        out = m * out + (1.0 - m) * hd

    def bw(g):
        g_keep = None
        if m is not None:
            g_keep = g * (1.0 - m)
            g = g * m
        dz = g * (hd - n)
        dn = g * (1.0 - z)
        da_n = dn * (1.0 - n * n)
        da_r = da_n * ghn * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)
        dgx = np.concatenate([da_r, da_z, da_n], axis=1)
        dgh = np.concatenate([da_r, da_z, da_n * r], axis=1)
        dh = dgh @ Wh.data.T + g * z
        if g_keep is not None:
            dh = dh + g_keep
        return (dgx @ Wx.data.T, dh, xd.T @ dgx, hd.T @ dgh, dgx.sum(axis=0), dgh.sum(axis=0))

    return _result(out, (x, h, Wx, Wh, bx, bh), bw, "gru_step")


# -- probabilities --------------------------------------------------------


def _clamp(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    inside = np.abs(z) <= LOGIT_CLAMP
    return np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP), inside


def softmax_np(z: np.ndarray) -> np.ndarray:
    z, _ = _clamp(np.asarray(z, dtype=np.float64))
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax_np(z: np.ndarray) -> np.ndarray:
    z, _ = _clamp(np.asarray(z, dtype=np.float64))
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(x) -> Tensor:
    x = as_tensor(x)
    _, inside = _clamp(x.data)
    s = softmax_np(x.data)

    def bw(g):
        return ((s * (g - (g * s).sum(axis=-1, keepdims=True))) * inside,)

    return _result(s, (x,), bw, "softmax")


def log_softmax(x) -> Tensor:
    x = as_tensor(x)
    _, inside = _clamp(x.data)
    out = log_softmax_np(x.data)
    s = np.exp(out)

    def bw(g):
        return ((g - s * g.sum(axis=-1, keepdims=True)) * inside,)

    return _result(out, (x,), bw, "log_softmax")


def cross_entropy(x, labels, from_logits: bool = True) -> Tensor:
    """Mean negative log-likelihood of ``labels``.

    With ``from_logits`` (the default) ``x`` holds raw scores and the
    log-softmax is fused in; otherwise ``x`` already holds probabilities.
    """
    x = as_tensor(x)
    single = x.ndim == 1
    if single:
        x = reshape(x, (1, -1))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.shape != (x.shape[0],) or labels.min() < 0 or labels.max() >= x.shape[1]:
        raise ShapeError(f"cross_entropy: labels {labels.tolist()} do not fit scores {x.shape}")
    logp = log_softmax(x) if from_logits else log(x)
    return mul(sum(pick(logp, labels)), -1.0 / x.shape[0])
