"""Minimal reverse-mode automatic differentiation over numpy arrays.

A ``Value`` wraps a float64 array together with the adjoint accumulated by
``backward``. Operations build a DAG; ``backward`` runs a topological sweep
from a scalar root and leaves exact reverse-mode derivatives in ``.grad``.
Plain numpy arrays and Python scalars mix freely with ``Value`` operands and
are treated as constants.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

__all__ = [
    "Value",
    "as_value",
    "backward",
    "concat",
    "cols",
    "clip",
    "elu",
    "exp",
    "log",
    "matmul",
    "sigmoid",
    "softplus",
    "sqrt",
    "square",
]


class Value:
    """Node in a dynamically built computation graph.

    ``data`` is the forward value, ``grad`` the adjoint (same shape).
    ``op`` and ``parents`` record provenance.
    """

    __slots__ = ("data", "grad", "op", "parents", "_vjp")

    # Make numpy defer to the reflected operators instead of broadcasting
    # Value objects elementwise.
    __array_ufunc__ = None

    def __init__(self, data, op="leaf", parents=(), vjp=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)
        self.op = op
        self.parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Value(op={self.op!r}, shape={self.data.shape})"

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return pow_const(self, exponent)

    def sum(self, axis=None, keepdims=False):
        return vsum(self, axis=axis, keepdims=keepdims)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)


def as_value(x) -> Value:
    """Wrap ``x`` as a constant leaf unless it already is a Value."""
    if isinstance(x, Value):
        return x
    return Value(x, op="const")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    g = np.asarray(g, dtype=np.float64)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# binary ops ---------------------------------------------------------------

def add(a, b) -> Value:
    a, b = as_value(a), as_value(b)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Value(a.data + b.data, "add", (a, b), vjp)


def sub(a, b) -> Value:
    a, b = as_value(a), as_value(b)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return Value(a.data - b.data, "sub", (a, b), vjp)


def mul(a, b) -> Value:
    a, b = as_value(a), as_value(b)

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return Value(a.data * b.data, "mul", (a, b), vjp)


def div(a, b) -> Value:
    a, b = as_value(a), as_value(b)

    def vjp(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return Value(a.data / b.data, "div", (a, b), vjp)


def matmul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(
            f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"matmul dimension mismatch: {a.data.shape} @ {b.data.shape}"
        )

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return Value(a.data @ b.data, "matmul", (a, b), vjp)


# unary ops ----------------------------------------------------------------

def neg(a) -> Value:
    a = as_value(a)
    return Value(-a.data, "neg", (a,), lambda g: (-g,))


def exp(a) -> Value:
    a = as_value(a)
    out_data = np.exp(a.data)
    return Value(out_data, "exp", (a,), lambda g: (g * out_data,))


def log(a) -> Value:
    a = as_value(a)
    return Value(np.log(a.data), "log", (a,), lambda g: (g / a.data,))


def sqrt(a) -> Value:
    a = as_value(a)
    out_data = np.sqrt(a.data)
    return Value(out_data, "sqrt", (a,), lambda g: (g * 0.5 / out_data,))


def square(a) -> Value:
    a = as_value(a)
    return Value(a.data * a.data, "square", (a,), lambda g: (g * 2.0 * a.data,))


def pow_const(a, exponent: float) -> Value:
    a = as_value(a)
    e = float(exponent)
    out_data = a.data**e

    def vjp(g):
        return (g * e * a.data ** (e - 1.0),)

    return Value(out_data, "pow", (a,), vjp)


def sigmoid(a) -> Value:
    a = as_value(a)
    out_data = expit(a.data)
    return Value(out_data, "sigmoid", (a,), lambda g: (g * out_data * (1.0 - out_data),))


def softplus(a) -> Value:
    """log(1 + exp(a)), computed stably; derivative is sigmoid(a)."""
    a = as_value(a)
    out_data = np.logaddexp(0.0, a.data)
    return Value(out_data, "softplus", (a,), lambda g: (g * expit(a.data),))


def elu(a) -> Value:
    """Exponential linear unit: x for x > 0, exp(x) - 1 otherwise."""
    a = as_value(a)
    neg_part = np.minimum(a.data, 0.0)
    out_data = np.where(a.data > 0.0, a.data, np.expm1(neg_part))

    def vjp(g):
        return (g * np.where(a.data > 0.0, 1.0, np.exp(neg_part)),)

    return Value(out_data, "elu", (a,), vjp)


def clip(a, lo: float, hi: float) -> Value:
    """Clamp to [lo, hi]; gradient is zero outside the open interval."""
    a = as_value(a)
    mask = (a.data > lo) & (a.data < hi)
    return Value(np.clip(a.data, lo, hi), "clip", (a,), lambda g: (g * mask,))


# shape ops ----------------------------------------------------------------

def vsum(a, axis=None, keepdims=False) -> Value:
    a = as_value(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return Value(out_data, "sum", (a,), vjp)


def concat(parts, axis=1) -> Value:
    parts = [as_value(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)

    def vjp(g):
        return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))

    return Value(out_data, "concat", tuple(parts), vjp)


def cols(a, start: int, stop: int) -> Value:
    """Column slice a[:, start:stop] of a 2-D Value."""
    a = as_value(a)
    if a.data.ndim != 2:
        raise ValueError(f"cols expects a 2-D Value, got shape {a.data.shape}")

    def vjp(g):
        full = np.zeros_like(a.data)
        full[:, start:stop] = g
        return (full,)

    return Value(a.data[:, start:stop], "cols", (a,), vjp)


# backward pass ------------------------------------------------------------

def _toposort(root: Value) -> list[Value]:
    order: list[Value] = []
    visited: set[int] = set()
    stack: list[tuple[Value, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(root: Value) -> None:
    """Accumulate adjoints of ``root`` into every reachable Value.

    All reachable adjoints are zeroed first, so repeated calls are
    idempotent. The root must be scalar (a single element).
    """
    if root.data.size != 1:
        raise ValueError(f"backward root must be scalar, got shape {root.data.shape}")
    order = _toposort(root)
    for node in order:
        node.grad = np.zeros_like(node.data)
    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node._vjp is None:
            continue
        for parent, contribution in zip(node.parents, node._vjp(node.grad)):
            parent.grad = parent.grad + contribution
