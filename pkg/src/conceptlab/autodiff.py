"""Array-valued reverse-mode differentiation on float64 numpy arrays.

Every op dispatches on its inputs: all-ndarray calls return a plain ndarray
with no graph built, while any `Var` input produces a `Var` wired for
backprop. Model code written against these ops therefore runs graph-free
during sampling and finite differencing, and traced during training, from a
single forward-pass implementation.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericFailure


class Var:
    """Graph node wrapping a float64 array."""

    __slots__ = ("value", "grad", "_parents", "_backward")
    __array_ufunc__ = None  # force numpy to defer to our reflected operators

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, p):
        return power(self, p)

    def __repr__(self):
        return f"Var(shape={self.value.shape})"


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _is_var(*xs) -> bool:
    return any(isinstance(x, Var) for x in xs)


def _accum(node: Var, g: np.ndarray):
    if node.grad is None:
        node.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        node.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    g = np.asarray(g, dtype=np.float64)
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    squeeze = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if squeeze:
        g = g.sum(axis=squeeze, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    if not _is_var(a, b):
        return value_of(a) + value_of(b)
    av, bv = value_of(a), value_of(b)

    def bw(g):
        if isinstance(a, Var):
            _accum(a, _unbroadcast(g, av.shape))
        if isinstance(b, Var):
            _accum(b, _unbroadcast(g, bv.shape))

    return Var(av + bv, _parents_of(a, b), bw)


def sub(a, b):
    if not _is_var(a, b):
        return value_of(a) - value_of(b)
    av, bv = value_of(a), value_of(b)

    def bw(g):
        if isinstance(a, Var):
            _accum(a, _unbroadcast(g, av.shape))
        if isinstance(b, Var):
            _accum(b, _unbroadcast(-g, bv.shape))

    return Var(av - bv, _parents_of(a, b), bw)


def mul(a, b):
    if not _is_var(a, b):
        return value_of(a) * value_of(b)
    av, bv = value_of(a), value_of(b)

    def bw(g):
        if isinstance(a, Var):
            _accum(a, _unbroadcast(g * bv, av.shape))
        if isinstance(b, Var):
            _accum(b, _unbroadcast(g * av, bv.shape))

    return Var(av * bv, _parents_of(a, b), bw)


def div(a, b):
    if not _is_var(a, b):
        return value_of(a) / value_of(b)
    av, bv = value_of(a), value_of(b)

    def bw(g):
        if isinstance(a, Var):
            _accum(a, _unbroadcast(g / bv, av.shape))
        if isinstance(b, Var):
            _accum(b, _unbroadcast(-g * av / (bv * bv), bv.shape))

    return Var(av / bv, _parents_of(a, b), bw)


def matmul(a, b):
    if not _is_var(a, b):
        return value_of(a) @ value_of(b)
    av, bv = value_of(a), value_of(b)

    def bw(g):
        if isinstance(a, Var):
            _accum(a, g @ bv.T)
        if isinstance(b, Var):
            _accum(b, av.T @ g)

    return Var(av @ bv, _parents_of(a, b), bw)


def power(a, p):
    p = float(p)
    if not _is_var(a):
        return value_of(a) ** p
    av = a.value

    def bw(g):
        _accum(a, g * p * av ** (p - 1.0))

    return Var(av**p, (a,), bw)


def asum(a, axis=None, keepdims=False):
    if not _is_var(a):
        return value_of(a).sum(axis=axis, keepdims=keepdims)
    av = a.value

    def bw(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, av.shape))
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(gg, av.shape))

    return Var(av.sum(axis=axis, keepdims=keepdims), (a,), bw)


def mean(a, axis=None):
    av = value_of(a)
    n = av.size if axis is None else av.shape[axis]
    return div(asum(a, axis=axis), float(n))


def exp(a):
    if not _is_var(a):
        return np.exp(value_of(a))
    out_val = np.exp(a.value)

    def bw(g):
        _accum(a, g * out_val)

    return Var(out_val, (a,), bw)


def log(a):
    if not _is_var(a):
        return np.log(value_of(a))
    av = a.value

    def bw(g):
        _accum(a, g / av)

    return Var(np.log(av), (a,), bw)


def sqrt(a):
    if not _is_var(a):
        return np.sqrt(value_of(a))
    out_val = np.sqrt(a.value)

    def bw(g):
        _accum(a, g / (2.0 * out_val))

    return Var(out_val, (a,), bw)


def absolute(a):
    if not _is_var(a):
        return np.abs(value_of(a))
    av = a.value

    def bw(g):
        _accum(a, g * np.sign(av))

    return Var(np.abs(av), (a,), bw)


def maximum(a, floor: float):
    """Elementwise max against a constant; subgradient 0 at the tie."""
    if not _is_var(a):
        return np.maximum(value_of(a), floor)
    av = a.value

    def bw(g):
        _accum(a, g * (av > floor))

    return Var(np.maximum(av, floor), (a,), bw)


def silu(a):
    """Smooth sigmoid-weighted linear activation."""
    av = value_of(a)
    s = 1.0 / (1.0 + np.exp(-av))
    if not _is_var(a):
        return av * s

    def bw(g):
        _accum(a, g * (s + av * s * (1.0 - s)))

    return Var(av * s, (a,), bw)


def concat(parts, axis=-1):
    vals = [value_of(p) for p in parts]
    if not _is_var(*parts):
        return np.concatenate(vals, axis=axis)
    sizes = [v.shape[axis] for v in vals]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if isinstance(part, Var):
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                _accum(part, g[tuple(sl)])

    return Var(np.concatenate(vals, axis=axis), _parents_of(*parts), bw)


def rows(a, idx):
    """Gather rows of a matrix by integer index (embedding lookup)."""
    idx = np.asarray(idx, dtype=np.intp)
    if not _is_var(a):
        return value_of(a)[idx]
    av = a.value

    def bw(g):
        ga = np.zeros_like(av)
        np.add.at(ga, idx, g)
        _accum(a, ga)

    return Var(av[idx], (a,), bw)


def reshape(a, shape):
    if not _is_var(a):
        return value_of(a).reshape(shape)
    av = a.value

    def bw(g):
        _accum(a, g.reshape(av.shape))

    return Var(av.reshape(shape), (a,), bw)


def segment(a, start: int, stop: int):
    """Contiguous slice of a flat vector (parameter segment view)."""
    if not _is_var(a):
        return value_of(a)[start:stop]
    av = a.value

    def bw(g):
        ga = np.zeros_like(av)
        ga[start:stop] = g
        _accum(a, ga)

    return Var(av[start:stop], (a,), bw)


def _parents_of(*xs):
    return tuple(x for x in xs if isinstance(x, Var))


def _topo(root: Var):
    order, seen, stack = [], set(), [(root, False)]
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backprop(root: Var):
    """Accumulate d(root)/d(leaf) into every reachable node's .grad."""
    if root.value.shape != ():
        raise ValueError("backprop requires a scalar root")
    order = _topo(root)
    for node in order:
        node.grad = None
    root.grad = np.array(1.0)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def value_and_grad(loss_fn, x: np.ndarray):
    """Evaluate loss_fn at x and return (value, gradient) via reverse mode.

    loss_fn receives a Var wrapping a copy of x and must return a scalar
    built from ops in this module (a plain float is treated as constant).
    """
    leaf = Var(np.array(x, dtype=np.float64, copy=True))
    out = loss_fn(leaf)
    if not isinstance(out, Var):
        val = float(out)
        if not np.isfinite(val):
            raise NumericFailure(f"loss evaluated to non-finite value {val}")
        return val, np.zeros_like(leaf.value)
    val = float(out.value)
    if not np.isfinite(val):
        raise NumericFailure(f"loss evaluated to non-finite value {val}")
    backprop(out)
    g = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
    return val, g
