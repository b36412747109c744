"""Reverse-mode automatic differentiation over float64 numpy arrays.

This is a deliberately small tape: it implements exactly the operations
the contextual utterance encoder needs (dense algebra, gating
nonlinearities, masked softmax, reductions and shape plumbing) and
nothing else. Leaf tensors own a gradient slot; calling ``backward`` on
a scalar result accumulates exact gradients into every leaf that
contributed to it.
"""
from __future__ import annotations

import contextlib

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (forward-only evaluation)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """A float64 numpy array plus the bookkeeping ``backward`` needs.

    Leaves (parameters, inputs) have no parents. Operation results carry
    a closure mapping the upstream gradient to per-parent gradients.
    """

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

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

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _data(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _attach(out: Tensor, parents: tuple, bwd) -> Tensor:
    if _GRAD_ENABLED and any(isinstance(p, Tensor) for p in parents):
        out._parents = parents
        out._backward = bwd
    return out


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    ad, bd = _data(a), _data(b)
    out = Tensor(ad + bd)

    def bwd(g):
        ga = _unbroadcast(g, ad.shape) if isinstance(a, Tensor) else None
        gb = _unbroadcast(g, bd.shape) if isinstance(b, Tensor) else None
        return ga, gb

    return _attach(out, (a, b), bwd)


def sub(a, b):
    ad, bd = _data(a), _data(b)
    out = Tensor(ad - bd)

    def bwd(g):
        ga = _unbroadcast(g, ad.shape) if isinstance(a, Tensor) else None
        gb = _unbroadcast(-g, bd.shape) if isinstance(b, Tensor) else None
        return ga, gb

    return _attach(out, (a, b), bwd)


def mul(a, b):
    ad, bd = _data(a), _data(b)
    out = Tensor(ad * bd)

    def bwd(g):
        ga = _unbroadcast(g * bd, ad.shape) if isinstance(a, Tensor) else None
        gb = _unbroadcast(g * ad, bd.shape) if isinstance(b, Tensor) else None
        return ga, gb

    return _attach(out, (a, b), bwd)


def div(a, b):
    ad, bd = _data(a), _data(b)
    out = Tensor(ad / bd)

    def bwd(g):
        ga = _unbroadcast(g / bd, ad.shape) if isinstance(a, Tensor) else None
        gb = (
            _unbroadcast(-g * ad / (bd * bd), bd.shape)
            if isinstance(b, Tensor)
            else None
        )
        return ga, gb

    return _attach(out, (a, b), bwd)


def power(a, p: float):
    ad = _data(a)
    out = Tensor(ad**p)

    def bwd(g):
        return (g * p * ad ** (p - 1),)

    return _attach(out, (a,), bwd)


# ---------------------------------------------------------------------------
# nonlinearities


def exp(a):
    y = np.exp(_data(a))
    out = Tensor(y)

    def bwd(g):
        return (g * y,)

    return _attach(out, (a,), bwd)


def log(a):
    ad = _data(a)
    out = Tensor(np.log(ad))

    def bwd(g):
        return (g / ad,)

    return _attach(out, (a,), bwd)


def sqrt(a):
    y = np.sqrt(_data(a))
    out = Tensor(y)

    def bwd(g):
        return (g * 0.5 / y,)

    return _attach(out, (a,), bwd)


def tanh(a):
    y = np.tanh(_data(a))
    out = Tensor(y)

    def bwd(g):
        return (g * (1.0 - y * y),)

    return _attach(out, (a,), bwd)


def _sigmoid_value(x: np.ndarray) -> np.ndarray:
    # exp(-|x|) never overflows
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def sigmoid(a):
    y = _sigmoid_value(_data(a))
    out = Tensor(y)

    def bwd(g):
        return (g * y * (1.0 - y),)

    return _attach(out, (a,), bwd)


def relu(a):
    ad = _data(a)
    out = Tensor(np.maximum(ad, 0.0))

    def bwd(g):
        return (g * (ad > 0.0),)

    return _attach(out, (a,), bwd)


def softplus(a):
    ad = _data(a)
    y = np.log1p(np.exp(-np.abs(ad))) + np.maximum(ad, 0.0)
    out = Tensor(y)

    def bwd(g):
        return (g * _sigmoid_value(ad),)

    return _attach(out, (a,), bwd)


def absolute(a):
    ad = _data(a)
    out = Tensor(np.abs(ad))

    def bwd(g):
        return (g * np.sign(ad),)

    return _attach(out, (a,), bwd)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, w):
    """Stacked matrix product ``a @ w`` with ``a`` (..., n, k) and ``w`` (k, m)."""
    ad, wd = _data(a), _data(w)
    if ad.ndim < 2 or wd.ndim != 2 or ad.shape[-1] != wd.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {ad.shape} @ {wd.shape}")
    out = Tensor(ad @ wd)

    def bwd(g):
        ga = g @ wd.T if isinstance(a, Tensor) else None
        gw = (
            ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, wd.shape[1])
            if isinstance(w, Tensor)
            else None
        )
        return ga, gw

    return _attach(out, (a, w), bwd)


def dot_last(x, v):
    """Contract the last axis of ``x`` (..., d) with the vector ``v`` (d,)."""
    xd, vd = _data(x), _data(v)
    if vd.ndim != 1 or xd.shape[-1] != vd.shape[0]:
        raise ValueError(f"dot_last: incompatible shapes {xd.shape} . {vd.shape}")
    out = Tensor(xd @ vd)

    def bwd(g):
        gx = g[..., None] * vd if isinstance(x, Tensor) else None
        gv = (
            (g[..., None] * xd).reshape(-1, vd.shape[0]).sum(axis=0)
            if isinstance(v, Tensor)
            else None
        )
        return gx, gv

    return _attach(out, (x, v), bwd)


# ---------------------------------------------------------------------------
# reductions and shape plumbing


def sum_(x, axis=None, keepdims: bool = False):
    xd = _data(x)
    out = Tensor(xd.sum(axis=axis, keepdims=keepdims))

    def bwd(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(g, axis)
        return (np.broadcast_to(gg, xd.shape),)

    return _attach(out, (x,), bwd)


def mean_(x, axis=None):
    xd = _data(x)
    n = xd.size if axis is None else xd.shape[axis]
    return mul(sum_(x, axis=axis), 1.0 / n)


def reshape(x, shape):
    xd = _data(x)
    out = Tensor(xd.reshape(shape))

    def bwd(g):
        return (g.reshape(xd.shape),)

    return _attach(out, (x,), bwd)


def take(x, key):
    """Basic indexing (ints and slices only — each element selected at most once)."""
    xd = _data(x)
    out = Tensor(xd[key])

    def bwd(g):
        full = np.zeros_like(xd)
        full[key] = g
        return (full,)

    return _attach(out, (x,), bwd)


def concat(parts, axis: int):
    datas = [_data(p) for p in parts]
    out = Tensor(np.concatenate(datas, axis=axis))
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum(sizes)[:-1]

    def bwd(g):
        pieces = np.split(g, offsets, axis=axis)
        return tuple(
            piece if isinstance(p, Tensor) else None
            for p, piece in zip(parts, pieces)
        )

    return _attach(out, tuple(parts), bwd)


# ---------------------------------------------------------------------------
# softmax


def masked_softmax(x, mask=None, allow_empty: bool = False):
    """Row-wise softmax over the last axis with optional boolean mask.

    Masked positions get probability 0. A row with no unmasked entry is
    an error unless ``allow_empty`` is set, in which case it yields an
    all-zero row (used internally for padded context slots).
    """
    xd = _data(x)
    if mask is None:
        m = np.ones(xd.shape, dtype=bool)
    else:
        m = np.broadcast_to(np.asarray(mask, dtype=bool), xd.shape)
    if not allow_empty and not m.any(axis=-1).all():
        raise ValueError("empty attention support")
    neg = np.where(m, xd, -np.inf)
    mx = neg.max(axis=-1, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    e = np.exp(neg - mx)
    s = e.sum(axis=-1, keepdims=True)
    y = e / np.where(s == 0.0, 1.0, s)
    out = Tensor(y)

    def bwd(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return (y * (g - dot),)

    return _attach(out, (x,), bwd)


# ---------------------------------------------------------------------------
# backward pass


def backward(root: Tensor) -> Tensor:
    """Accumulate d(root)/d(leaf) into every contributing leaf's ``grad``."""
    if root.data.size != 1:
        raise ValueError("backward() requires a scalar output")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if isinstance(p, Tensor) and id(p) not in seen:
                stack.append((p, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is None or node.grad is None:
            continue
        for p, gp in zip(node._parents, node._backward(node.grad)):
            if gp is None or not isinstance(p, Tensor):
                continue
            p.grad = gp if p.grad is None else p.grad + gp
    return root
