"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` is a node on the tape: it stores its value, the parents it
was computed from, and a closure that routes the output gradient to each
parent. Plain ``numpy`` arrays act as constants. Every op in this module
accepts either kind; when no argument is a Tensor the op degrades to the
corresponding numpy computation, so the same model code serves both training
and inference.

Training runs in float32. For finite-difference verification the caller
converts all parameters to float64 (wide-precision mode) and rebuilds the
graph; nothing in the engine is dtype-specific.
"""

import numpy as np

from . import kernels

__all__ = [
    "Tensor", "GradientError", "parameter", "value", "backward",
    "matmul", "linear", "exp", "log", "sqrt", "sigmoid", "sine", "sine_and_deriv",
    "absolute", "power", "maximum", "clip", "sum_", "mean_", "concat",
    "reshape", "slice_cols", "l2norm_last", "env_lookup",
]


class GradientError(RuntimeError):
    """Raised when a backward pass produces non-finite gradients."""


class Tensor:
    """A tape node. Construction with parents records the backward rule."""

    __slots__ = ("data", "grad", "_parents")

    # Defer all numpy binary ops to the reflected Tensor operators so that
    # ndarray * Tensor builds a tape node instead of an object array.
    __array_ufunc__ = None

    def __init__(self, data, parents=()):
        self.data = np.asarray(data)
        self.grad = None
        self._parents = tuple(parents)

    # -- bookkeeping ------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return not self._parents

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        # Stored by reference: backward closures must hand over arrays they
        # own (add/sub copy when unbroadcast would alias the upstream grad).
        if self.grad is None:
            self.grad = g
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, leaf={self.is_leaf})"

    # -- operator sugar ----------------------------------------------------

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


def parameter(data) -> Tensor:
    """A trainable leaf tensor."""
    return Tensor(np.asarray(data))


def value(x):
    """Underlying numpy array of a Tensor or constant."""
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def _dat(x):
    """Raw operand: Tensor payload, or the constant as passed.

    Python scalars are deliberately not wrapped in arrays so numpy's weak
    scalar promotion applies and float32 graphs stay float32.
    """
    return x.data if isinstance(x, Tensor) else x


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _node(out, pairs):
    """Build a Tensor from an output array and (parent, grad_fn) pairs."""
    parents = [(p, fn) for p, fn in pairs if isinstance(p, Tensor)]
    if not parents:
        return out
    return Tensor(out, parents)


# ---------------------------------------------------------------------------
# elementwise arithmetic (with numpy-style broadcasting)
# ---------------------------------------------------------------------------

def _unbroadcast_owned(g, shape):
    """Like _unbroadcast, but never aliases g (copies in the identity case)."""
    out = _unbroadcast(g, shape)
    return out.copy() if out is g else out


def add(a, b):
    ad, bd = _dat(a), _dat(b)
    return _node(ad + bd, [
        (a, lambda g: _unbroadcast_owned(g, ad.shape)),
        (b, lambda g: _unbroadcast_owned(g, bd.shape)),
    ])


def sub(a, b):
    ad, bd = _dat(a), _dat(b)
    return _node(ad - bd, [
        (a, lambda g: _unbroadcast_owned(g, ad.shape)),
        (b, lambda g: _unbroadcast(-g, bd.shape)),
    ])


def mul(a, b):
    ad, bd = _dat(a), _dat(b)
    return _node(ad * bd, [
        (a, lambda g: _unbroadcast(g * bd, ad.shape)),
        (b, lambda g: _unbroadcast(g * ad, bd.shape)),
    ])


def div(a, b):
    ad, bd = _dat(a), _dat(b)
    out = ad / bd
    return _node(out, [
        (a, lambda g: _unbroadcast(g / bd, ad.shape)),
        (b, lambda g: _unbroadcast(-g * out / bd, bd.shape)),
    ])


def power(a, p):
    """Elementwise a**p for a constant exponent p."""
    ad = _dat(a)
    out = ad ** p
    return _node(out, [(a, lambda g: g * (p * ad ** (p - 1)))])


def exp(a, clip_max=None):
    """Elementwise exp; optionally clips the argument from above to keep the
    result finite in float32 (gradient is zero past the clip)."""
    ad = _dat(a)
    if clip_max is None:
        out = np.exp(ad)
        return _node(out, [(a, lambda g: g * out)])
    clipped = np.minimum(ad, clip_max)
    out = np.exp(clipped)
    mask = (ad < clip_max).astype(ad.dtype)
    return _node(out, [(a, lambda g: g * out * mask)])


def log(a):
    ad = _dat(a)
    return _node(np.log(ad), [(a, lambda g: g / ad)])


def sqrt(a):
    ad = _dat(a)
    out = np.sqrt(ad)
    return _node(out, [(a, lambda g: g * (0.5 / out))])


def sigmoid(a):
    ad = _dat(a)
    out = kernels.sigmoid(ad)
    return _node(out, [(a, lambda g: g * out * (1.0 - out))])


def sine(a, omega=1.0):
    """sin(omega * a); the cosine for the backward pass is computed lazily."""
    ad = _dat(a)
    out = kernels.sine_forward(ad, float(omega))
    return _node(out, [(a, lambda g: kernels.sine_backward(ad, float(omega), g))])


def cosine(a, omega=1.0):
    """cos(omega * a)."""
    ad_ = _dat(a)
    return _node(np.cos(omega * ad_), [(a, lambda g: g * (-omega * np.sin(omega * ad_)))])


def sine_and_deriv(a, omega=1.0):
    """Returns (sin(omega a), omega cos(omega a)) as two tape nodes.

    The derivative output feeds forward-mode tangent streams, so it must be
    differentiable itself: d/da [omega cos(omega a)] = -omega^2 sin(omega a).
    """
    ad = _dat(a)
    s, d = kernels.sincos_forward(ad, float(omega))
    w2 = float(omega) ** 2
    s_node = _node(s, [(a, lambda g: g * d)])
    d_node = _node(d, [(a, lambda g: g * (-w2 * s))])
    return s_node, d_node


def absolute(a):
    ad = _dat(a)
    return _node(np.abs(ad), [(a, lambda g: g * np.sign(ad))])


def maximum(a, const):
    """Elementwise max with a constant floor; subgradient 0 at the tie."""
    ad = _dat(a)
    mask = (ad > const).astype(ad.dtype)
    return _node(np.maximum(ad, const), [(a, lambda g: g * mask)])


def clip(a, lo, hi):
    ad = _dat(a)
    mask = ((ad > lo) & (ad < hi)).astype(ad.dtype)
    return _node(np.clip(ad, lo, hi), [(a, lambda g: g * mask)])


# ---------------------------------------------------------------------------
# linear algebra / shape ops
# ---------------------------------------------------------------------------

def matmul(a, b):
    ad, bd = _dat(a), _dat(b)
    if ad.ndim != 2 or bd.ndim != 2 or ad.shape[1] != bd.shape[0]:
        raise ValueError(f"matmul shape mismatch: {ad.shape} @ {bd.shape}")
    return _node(ad @ bd, [
        (a, lambda g: g @ bd.T),
        (b, lambda g: ad.T @ g),
    ])


def linear(x, w, b):
    """Fused x @ w + b (bias broadcast over rows)."""
    xd, wd, bd = _dat(x), _dat(w), _dat(b)
    if xd.ndim != 2 or wd.ndim != 2 or xd.shape[1] != wd.shape[0]:
        raise ValueError(f"linear shape mismatch: {xd.shape} @ {wd.shape}")
    out = xd @ wd
    out += bd
    return _node(out, [
        (x, lambda g: g @ wd.T),
        (w, lambda g: xd.T @ g),
        (b, lambda g: g.sum(axis=0)),
    ])


def sum_(a, axis=None, keepdims=False):
    ad = _dat(a)
    out = ad.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is None:
            return np.broadcast_to(g, ad.shape).astype(ad.dtype, copy=True)
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, ad.shape).astype(ad.dtype, copy=True)

    return _node(out, [(a, back)])


def mean_(a, axis=None, keepdims=False):
    ad = _dat(a)
    count = ad.size if axis is None else ad.shape[axis]
    s = sum_(a, axis=axis, keepdims=keepdims)
    return mul(s, 1.0 / count) if isinstance(s, Tensor) else s / count


def concat(parts, axis=-1):
    datas = [_dat(p) for p in parts]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    pairs = []
    for i, p in enumerate(parts):
        lo, hi = offsets[i], offsets[i + 1]

        def back(g, lo=lo, hi=hi):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            return g[tuple(sl)]

        pairs.append((p, back))
    return _node(out, pairs)


def reshape(a, shape):
    ad = _dat(a)
    return _node(ad.reshape(shape), [(a, lambda g: g.reshape(ad.shape))])


def slice_cols(a, start, stop):
    """Slice along the last axis; the backward pass scatters into zeros."""
    ad = _dat(a)
    out = ad[..., start:stop]

    def back(g):
        full = np.zeros_like(ad)
        full[..., start:stop] = g
        return full

    return _node(out, [(a, back)])


def l2norm_last(a, eps=1e-12):
    """Euclidean norm along the last axis.

    The forward value is exact (zero input gives zero norm); the backward pass
    guards the division so a constant field yields zero, not NaN, gradients.
    """
    ad = _dat(a)
    out = np.sqrt(np.sum(ad * ad, axis=-1))

    def back(g):
        safe = np.maximum(out, eps)
        return (g / safe)[..., None] * ad

    return _node(out, [(a, back)])


def env_lookup(grid, dirs):
    """Bilinear lat-long lookup of unit directions, differentiable w.r.t. the grid."""
    gd = _dat(grid)
    dd = np.asarray(dirs)
    out = kernels.env_lookup(gd, dd)
    return _node(out, [(grid, lambda g: kernels.env_lookup_backward(gd.shape, dd, g))])


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def _topo_order(root: Tensor):
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent, _ in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor, check_finite=False):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every participating leaf.

    ``loss`` must be scalar. With ``check_finite`` the leaf gradients are
    scanned afterwards and a GradientError is raised on NaN/inf.
    """
    if not isinstance(loss, Tensor):
        raise TypeError("backward() needs a Tensor that depends on at least one Tensor leaf")
    if loss.data.size != 1:
        raise ValueError(f"backward() expects a scalar loss, got shape {loss.data.shape}")

    order = _topo_order(loss)
    loss.grad = np.ones_like(loss.data)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        for node in reversed(order):
            g = node.grad
            if g is None:
                continue
            for parent, fn in node._parents:
                parent._accumulate(fn(g))
            if not node.is_leaf:
                node.grad = None  # free intermediate gradients as we go

    if check_finite:
        bad = [n for n in order if n.is_leaf and n.grad is not None and not np.all(np.isfinite(n.grad))]
        if bad:
            raise GradientError(f"non-finite gradients in {len(bad)} leaf tensor(s)")
