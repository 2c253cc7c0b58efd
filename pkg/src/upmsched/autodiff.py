"""Minimal reverse-mode automatic differentiation over numpy arrays.

A ``Var`` wraps a float64 ndarray and records the operation that produced it;
calling :meth:`Var.backward` on a scalar result accumulates gradients into
every reachable ``Var`` with ``requires_grad``.  Only the operations needed by
the policy network are provided; elementwise ops broadcast like numpy and
gradients are summed back to the operand shapes.
"""
from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Var:
    __slots__ = ("data", "grad", "_backward", "_parents", "requires_grad")

    def __init__(self, data, parents=(), backward=None, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    # -- graph execution ----------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo: list[Var] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accum(self, g: np.ndarray):
        # copy: g may alias a consumer's grad buffer shared with other parents
        if self.grad is None:
            self.grad = np.array(g)
        else:
            self.grad += g

    # -- elementwise arithmetic --------------------------------------------

    def __add__(self, other):
        other = other if isinstance(other, Var) else Var(other)
        out = Var(self.data + other.data, (self, other))

        def bw(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(g, other.data.shape))
        out._backward = bw
        return out

    __radd__ = __add__

    def __mul__(self, other):
        other = other if isinstance(other, Var) else Var(other)
        out = Var(self.data * other.data, (self, other))

        def bw(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(g * self.data, other.data.shape))
        out._backward = bw
        return out

    __rmul__ = __mul__

    def __sub__(self, other):
        other = other if isinstance(other, Var) else Var(other)
        out = Var(self.data - other.data, (self, other))

        def bw(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(-g, other.data.shape))
        out._backward = bw
        return out

    def __neg__(self):
        return self * -1.0

    def __matmul__(self, other):
        other = other if isinstance(other, Var) else Var(other)
        out = Var(self.data @ other.data, (self, other))

        def bw(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g @ np.swapaxes(other.data, -1, -2),
                                         self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(np.swapaxes(self.data, -1, -2) @ g,
                                          other.data.shape))
        out._backward = bw
        return out

    def __getitem__(self, idx):
        out = Var(self.data[idx], (self,))

        def bw(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[idx] += g
                self._accum(full)
        out._backward = bw
        return out

    def reshape(self, *shape):
        out = Var(self.data.reshape(*shape), (self,))

        def bw(g):
            if self.requires_grad:
                self._accum(g.reshape(self.data.shape))
        out._backward = bw
        return out

    def sum(self, axis=None, keepdims=False):
        out = Var(self.data.sum(axis=axis, keepdims=keepdims), (self,))

        def bw(g):
            if not self.requires_grad:
                return
            if axis is None:
                self._accum(np.broadcast_to(g, self.data.shape).copy())
            else:
                if not keepdims:
                    g = np.expand_dims(g, axis)
                self._accum(np.broadcast_to(g, self.data.shape).copy())
        out._backward = bw
        return out

    def mean(self):
        return self.sum() * (1.0 / self.data.size)


# -- nonlinearities ---------------------------------------------------------

def tanh(x: Var) -> Var:
    y = np.tanh(x.data)
    out = Var(y, (x,))

    def bw(g):
        if x.requires_grad:
            x._accum(g * (1.0 - y * y))
    out._backward = bw
    return out


def sigmoid(x: Var) -> Var:
    y = 1.0 / (1.0 + np.exp(-x.data))
    out = Var(y, (x,))

    def bw(g):
        if x.requires_grad:
            x._accum(g * y * (1.0 - y))
    out._backward = bw
    return out


def leaky_relu(x: Var, alpha: float) -> Var:
    mask = np.where(x.data > 0.0, 1.0, alpha)
    out = Var(x.data * mask, (x,))

    def bw(g):
        if x.requires_grad:
            x._accum(g * mask)
    out._backward = bw
    return out


def softmax(x: Var) -> Var:
    """Softmax over the last axis."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    y = ez / ez.sum(axis=-1, keepdims=True)
    out = Var(y, (x,))

    def bw(g):
        if x.requires_grad:
            x._accum(y * (g - (g * y).sum(axis=-1, keepdims=True)))
    out._backward = bw
    return out


# -- structural ops ---------------------------------------------------------

def concat(vars_: list[Var], axis: int = -1) -> Var:
    out = Var(np.concatenate([v.data for v in vars_], axis=axis), tuple(vars_))
    sizes = [v.data.shape[axis] for v in vars_]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        for v, piece in zip(vars_, np.split(g, splits, axis=axis)):
            if v.requires_grad:
                v._accum(piece)
    out._backward = bw
    return out


def stack(vars_: list[Var], axis: int) -> Var:
    out = Var(np.stack([v.data for v in vars_], axis=axis), tuple(vars_))

    def bw(g):
        for i, v in enumerate(vars_):
            if v.requires_grad:
                v._accum(np.take(g, i, axis=axis))
    out._backward = bw
    return out


def swap_last(x: Var) -> Var:
    """Transpose the last two axes."""
    out = Var(np.swapaxes(x.data, -1, -2), (x,))

    def bw(g):
        if x.requires_grad:
            x._accum(np.swapaxes(g, -1, -2))
    out._backward = bw
    return out
