"""A small reverse-mode automatic differentiation kernel over numpy arrays.

Each operation returns a new ``Tensor`` that remembers its parents and a
closure that pushes the output gradient back to them. ``backward`` walks the
graph in reverse topological order.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from qdecomp.errors import ShapeMismatch


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[np.ndarray], None] | None = None,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(value: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(value)
    return Tensor(value, True, tuple(parents), backward)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(a.value + b.value, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _make(a.value - b.value, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.value, b.shape))

    return _make(a.value * b.value, (a, b), bw)


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"cannot multiply {a.shape} by {b.shape}")

    def bw(g):
        if a.requires_grad:
            a._accumulate(g @ b.value.T)
        if b.requires_grad:
            b._accumulate(a.value.T @ g)

    return _make(a.value @ b.value, (a, b), bw)


def sigmoid(a: Tensor) -> Tensor:
    # split by sign so exp never overflows
    x = a.value
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bw(g):
        a._accumulate(g * out * (1.0 - out))

    return _make(out, (a,), bw)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.value)

    def bw(g):
        a._accumulate(g * (1.0 - out * out))

    return _make(out, (a,), bw)


def log(a: Tensor) -> Tensor:
    def bw(g):
        a._accumulate(g / a.value)

    return _make(np.log(a.value), (a,), bw)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.value)

    def bw(g):
        a._accumulate(g * out)

    return _make(out, (a,), bw)


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape))

    return _make(np.sum(a.value, axis=axis, keepdims=keepdims), (a,), bw)


def mean(a: Tensor) -> Tensor:
    return mul(tsum(a), 1.0 / a.value.size)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    def bw(g):
        a._accumulate(g.reshape(a.shape))

    return _make(a.value.reshape(shape), (a,), bw)


def getitem(a: Tensor, index) -> Tensor:
    def bw(g):
        full = np.zeros_like(a.value)
        np.add.at(full, index, g)
        a._accumulate(full)

    return _make(a.value[index], (a,), bw)


def log_softmax(a: Tensor) -> Tensor:
    """Log-softmax over the last axis."""
    x = a.value
    shifted = x - x.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def bw(g):
        a._accumulate(g - probs * g.sum(axis=-1, keepdims=True))

    return _make(out, (a,), bw)


def softmax(x: np.ndarray) -> np.ndarray:
    """Plain numpy softmax over the last axis (no gradient)."""
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def take_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Embedding lookup: ``table[ids]`` with ids of any shape."""
    ids = np.asarray(ids, dtype=np.int64)

    def bw(g):
        full = np.zeros_like(table.value)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        table._accumulate(full)

    return _make(table.value[ids], (table,), bw)


def pick(a: Tensor, idx: np.ndarray) -> Tensor:
    """``a[b, idx[b]]`` for a 2-D tensor, one entry per row."""
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(a.shape[0])

    def bw(g):
        full = np.zeros_like(a.value)
        full[rows, idx] = g
        a._accumulate(full)

    return _make(a.value[rows, idx], (a,), bw)


def pick_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """``a[b, idx[b], :]`` for a 3-D tensor."""
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(a.shape[0])

    def bw(g):
        full = np.zeros_like(a.value)
        full[rows, idx] = g
        a._accumulate(full)

    return _make(a.value[rows, idx], (a,), bw)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [_lift(p) for p in parts]
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            if p.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                p._accumulate(g[tuple(sl)])

    return _make(np.concatenate([p.value for p in parts], axis=axis), parts, bw)


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [_lift(p) for p in parts]

    def bw(g):
        for k, p in enumerate(parts):
            if p.requires_grad:
                p._accumulate(np.take(g, k, axis=axis))

    return _make(np.stack([p.value for p in parts], axis=axis), parts, bw)


def backward(root: Tensor, seed: np.ndarray | None = None) -> None:
    """Accumulate d(root)/d(leaf) into ``.grad`` of every reachable leaf."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack_: list[tuple[Tensor, bool]] = [(root, False)]
    while stack_:
        node, done = stack_.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    root.grad = np.ones_like(root.value) if seed is None else np.asarray(seed, dtype=np.float64)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
            if node._parents:
                # interior buffers are no longer needed once pushed back
                node.grad = None if node is not root else node.grad
