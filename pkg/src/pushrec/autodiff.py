"""Minimal reverse-mode automatic differentiation over numpy arrays.

Supports exactly the primitives the trainer losses need: affine maps, tanh,
exp, elementwise powers and abs, reductions, elementwise minimum and clipping.
Gradients are exact reverse-mode; parameters that do not reach the loss get a
zero gradient rather than an error.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    if grad.shape == shape:
        return grad
    # sum away leading axes numpy added
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    # -- graph construction helpers ---------------------------------------

    @staticmethod
    def _lift(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))

    def _make(self, data, parents, backward) -> "Tensor":
        req = any(p.requires_grad for p in parents)
        return Tensor(data, requires_grad=req, parents=parents,
                      backward=backward if req else None)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = self._lift(other)

        def bwd(g):
            return (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape))
        return self._make(self.data + other.data, (self, other), bwd)

    __radd__ = __add__

    def __neg__(self):
        def bwd(g):
            return (-g,)
        return self._make(-self.data, (self,), bwd)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        other = self._lift(other)

        def bwd(g):
            return (_unbroadcast(g * other.data, self.shape),
                    _unbroadcast(g * self.data, other.shape))
        return self._make(self.data * other.data, (self, other), bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)

        def bwd(g):
            return (_unbroadcast(g / other.data, self.shape),
                    _unbroadcast(-g * self.data / (other.data ** 2), other.shape))
        return self._make(self.data / other.data, (self, other), bwd)

    def __pow__(self, exponent: float):
        assert np.isscalar(exponent)

        def bwd(g):
            return (g * exponent * self.data ** (exponent - 1),)
        return self._make(self.data ** exponent, (self,), bwd)

    def __matmul__(self, other):
        other = self._lift(other)

        def bwd(g):
            return (g @ other.data.T, self.data.T @ g)
        return self._make(self.data @ other.data, (self, other), bwd)

    # -- nonlinearities -----------------------------------------------------

    def tanh(self):
        out = np.tanh(self.data)

        def bwd(g):
            return (g * (1.0 - out * out),)
        return self._make(out, (self,), bwd)

    def exp(self):
        out = np.exp(self.data)

        def bwd(g):
            return (g * out,)
        return self._make(out, (self,), bwd)

    def abs(self):
        def bwd(g):
            return (g * np.sign(self.data),)
        return self._make(np.abs(self.data), (self,), bwd)

    def clip(self, lo: float, hi: float):
        """Clamp to constant bounds; gradient passes only inside the interval."""
        inside = (self.data > lo) & (self.data < hi)

        def bwd(g):
            return (g * inside,)
        return self._make(np.clip(self.data, lo, hi), (self,), bwd)

    def minimum(self, other):
        """Elementwise minimum; the smaller branch receives the gradient."""
        other = self._lift(other)
        take_self = self.data <= other.data

        def bwd(g):
            return (_unbroadcast(g * take_self, self.shape),
                    _unbroadcast(g * ~take_self, other.shape))
        return self._make(np.minimum(self.data, other.data), (self, other), bwd)

    # -- reductions / shape --------------------------------------------------

    def sum(self, axis=None):
        def bwd(g):
            if axis is None:
                return (np.broadcast_to(g, self.shape).copy(),)
            return (np.broadcast_to(np.expand_dims(g, axis), self.shape).copy(),)
        return self._make(self.data.sum(axis=axis), (self,), bwd)

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]

        def bwd(g):
            if axis is None:
                return (np.broadcast_to(g / n, self.shape).copy(),)
            return (np.broadcast_to(np.expand_dims(g / n, axis), self.shape).copy(),)
        return self._make(self.data.mean(axis=axis), (self,), bwd)

    def reshape(self, *shape):
        def bwd(g):
            return (g.reshape(self.shape),)
        return self._make(self.data.reshape(*shape), (self,), bwd)

    # -- reverse pass --------------------------------------------------------

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable tensor."""
        if self.data.size != 1:
            raise ValueError("backward() expects a scalar loss")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))

        for node in topo:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is None:
                continue
            grads = node._backward(node.grad)
            for parent, g in zip(node._parents, grads):
                if parent.requires_grad:
                    if parent.grad is None:
                        parent.grad = np.zeros_like(parent.data)
                    parent.grad += g


def param(data) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)


def const(data) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=False)
