"""Dense float64 tensor with reverse-mode differentiation.

A :class:`Tensor` wraps a numpy array. Operations on tensors that require
gradients record a node holding the operands and a closure that maps the
output gradient to operand gradients; :meth:`Tensor.backward` walks those
nodes once each in reverse topological order.
"""

import contextlib

import numpy as np
from scipy.special import expit

from ..errors import ArgumentError, DimensionError, DomainError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Build no graph inside the block (inference, finite differences)."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class Tensor:
    __array_ufunc__ = None  # ndarray <op> Tensor defers to the Tensor method

    def __init__(self, data, requires_grad=False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents = ()
        self._backward = None
        self.op = ""

    @classmethod
    def _make(cls, data, parents, backward, op):
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
        out.grad = None
        out.op = op
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # -- basic properties -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self):
        return len(self.data)

    def _accum(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad = self.grad + g

    # -- backward -----------------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ArgumentError(f"backward needs a scalar, got shape {self.shape}")
        if not self.requires_grad:
            return
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        for node in order:
            if node._backward is not None:
                node.grad = None
        self.grad = np.ones_like(self.data) if self._backward is not None else self.grad + 1.0
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- arithmetic -----------------------------------------------------------

    def _binary(self, other, fwd, grads, op):
        other = _as_tensor(other)
        try:
            out = fwd(self.data, other.data)
        except ValueError as exc:
            raise DimensionError(f"{op}: shapes {self.shape} and {other.shape} do not broadcast") from exc
        a, b = self, other

        def backward(g):
            ga, gb = grads(g, a.data, b.data, out)
            if a.requires_grad:
                a._accum(_unbroadcast(ga, a.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(gb, b.shape))

        return Tensor._make(out, (a, b), backward, op)

    def __add__(self, other):
        return self._binary(other, np.add, lambda g, a, b, o: (g, g), "add")

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract, lambda g, a, b, o: (g, -g), "sub")

    def __rsub__(self, other):
        return _as_tensor(other) - self

    def __mul__(self, other):
        return self._binary(other, np.multiply, lambda g, a, b, o: (g * b, g * a), "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide, lambda g, a, b, o: (g / b, -g * a / (b * b)), "div")

    def __rtruediv__(self, other):
        return _as_tensor(other) / self

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: self._accum(-g), "neg")

    def __pow__(self, p):
        if isinstance(p, Tensor):
            raise TypeError("only scalar exponents are supported")
        p = float(p)
        x = self.data
        return Tensor._make(x ** p, (self,), lambda g: self._accum(g * p * x ** (p - 1.0)), "pow")

    def __matmul__(self, other):
        other = _as_tensor(other)
        a, b = self.data, other.data
        if a.ndim not in (1, 2) or b.ndim != 2 or a.shape[-1] != b.shape[0]:
            raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not agree")
        out = a @ b
        x, w = self, other

        def backward(g):
            if x.requires_grad:
                x._accum(g @ b.T)
            if w.requires_grad:
                w._accum(np.outer(a, g) if a.ndim == 1 else a.T @ g)

        return Tensor._make(out, (x, w), backward, "matmul")

    def __getitem__(self, idx):
        out = self.data[idx]
        shape = self.shape

        def backward(g):
            gx = np.zeros(shape, dtype=np.float64)
            np.add.at(gx, idx, g)
            self._accum(gx)

        return Tensor._make(out, (self,), backward, "getitem")

    # -- reductions and reshaping -----------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = self.data.sum(axis=axis, keepdims=keepdims)
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accum(np.broadcast_to(g, shape))

        return Tensor._make(out, (self,), backward, "sum")

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        try:
            out = self.data.reshape(shape)
        except ValueError as exc:
            raise DimensionError(f"cannot reshape {self.shape} to {shape}") from exc
        orig = self.shape
        return Tensor._make(out, (self,), lambda g: self._accum(g.reshape(orig)), "reshape")

    # -- elementwise functions ---------------------------------------------

    def exp(self):
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: self._accum(g * out), "exp")

    def log(self):
        if np.any(self.data <= 0):
            raise DomainError("log of a non-positive element")
        x = self.data
        return Tensor._make(np.log(x), (self,), lambda g: self._accum(g / x), "log")

    def sqrt(self):
        if np.any(self.data < 0):
            raise DomainError("sqrt of a negative element")
        out = np.sqrt(self.data)
        return Tensor._make(out, (self,), lambda g: self._accum(g * 0.5 / out), "sqrt")

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor._make(out, (self,), lambda g: self._accum(g * (1.0 - out * out)), "tanh")

    def sigmoid(self):
        out = expit(self.data)
        return Tensor._make(out, (self,), lambda g: self._accum(g * out * (1.0 - out)), "sigmoid")

    def relu(self):
        mask = self.data > 0
        return Tensor._make(np.where(mask, self.data, 0.0), (self,), lambda g: self._accum(g * mask), "relu")

    def softplus(self):
        x = self.data
        return Tensor._make(
            np.logaddexp(0.0, x), (self,), lambda g: self._accum(g * expit(x)), "softplus"
        )

    def clip(self, lo, hi):
        x = self.data
        mask = (x >= lo) & (x <= hi)
        return Tensor._make(np.clip(x, lo, hi), (self,), lambda g: self._accum(g * mask), "clip")


def tensor(data, requires_grad=False):
    return Tensor(data, requires_grad=requires_grad)


def zeros(shape, requires_grad=False):
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def ones(shape, requires_grad=False):
    return Tensor(np.ones(shape), requires_grad=requires_grad)
