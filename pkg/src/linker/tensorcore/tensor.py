"""Dense float64 tensors with reverse-mode automatic differentiation.

The tape is the op graph itself: every recorded op stores its input tensors
and a vector-Jacobian closure on the output. ``backward`` replays that graph
once in reverse topological order, accumulating gradients into the
``.grad`` buffer of every requires_grad leaf. Non-leaf gradients live only
in a per-pass map, so calling backward twice doubles leaf gradients exactly.

Reductions accumulate in float64 regardless of build flavor; conv/pool
forward+backward go through ``kernels`` (compiled when available).
"""

from __future__ import annotations

import numpy as np

from ..errors import NoTape, ShapeMismatch
from . import kernels

_grad_enabled = True


class no_grad:
    """Context manager: ops executed inside record nothing."""

    def __enter__(self):
        global _grad_enabled
        self._saved = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._saved
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_prev", "_vjp")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._prev = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def detach(self):
        t = Tensor(self.data)
        return t

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; every actual op is a module-level function
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def max(self, axis=None, keepdims=False):
        return max_(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)

    @property
    def T(self):
        return transpose(self, None)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(data, inputs, vjp):
    out = Tensor(data)
    if _grad_enabled and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._prev = tuple(inputs)
        out._vjp = vjp
    return out


def backward(loss):
    """Accumulate d(loss)/d(leaf) into .grad for all requires_grad leaves."""
    if loss.data.size != 1:
        raise ShapeMismatch(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss._prev:
        raise NoTape("tensor was not produced by a recorded op")

    topo, visited = [], set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for child in node._prev:
            if id(child) not in visited:
                stack.append((child, False))

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._vjp is not None:
            for inp, gi in zip(node._prev, node._vjp(g)):
                if gi is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = np.array(gi, dtype=np.float64, copy=True)
        elif node.requires_grad:
            node.grad = g if node.grad is None else node.grad + g


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# --- arithmetic --------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.data.shape),
                              _unbroadcast(g * a.data, b.data.shape)))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data / b.data, (a, b),
                   lambda g: (_unbroadcast(g / b.data, a.data.shape),
                              _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)))


def pow_(a, p):
    """Elementwise a**p for a scalar exponent p."""
    a = as_tensor(a)
    p = float(p)
    out = a.data ** p

    def vjp(g):
        if p == 0.0:
            return (np.zeros_like(a.data),)
        return (g * p * a.data ** (p - 1.0),)

    return _record(out, (a,), vjp)


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _record(out, (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    return _record(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a):
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _record(out, (a,), lambda g: (g * 0.5 / out,))


def clip(a, lo, hi):
    a = as_tensor(a)
    out = np.clip(a.data, lo, hi)
    mask = (a.data >= lo) & (a.data <= hi)
    return _record(out, (a,), lambda g: (g * mask,))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeMismatch(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    return _record(a.data @ b.data, (a, b),
                   lambda g: (g @ b.data.T, a.data.T @ g))


# --- reductions --------------------------------------------------------------

def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gk, a.data.shape).copy(),)

    return _record(out, (a,), vjp)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        n = a.data.size
    elif isinstance(axis, tuple):
        n = int(np.prod([a.data.shape[i] for i in axis]))
    else:
        n = a.data.shape[axis]
    return mul(sum_(a, axis, keepdims), 1.0 / n)


def max_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.max(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            full = np.broadcast_to(out, a.data.shape)
            gfull = np.broadcast_to(g, a.data.shape)
        else:
            full = out if keepdims else np.expand_dims(out, axis)
            full = np.broadcast_to(full, a.data.shape)
            gk = g if keepdims else np.expand_dims(g, axis)
            gfull = np.broadcast_to(gk, a.data.shape)
        mask = (a.data == full)
        nsel = mask.sum(axis=axis, keepdims=True) if axis is not None else mask.sum()
        if axis is not None:
            nsel = np.broadcast_to(nsel, a.data.shape)
        return (gfull * mask / nsel,)   # ties share the gradient evenly

    return _record(out, (a,), vjp)


# --- activations -------------------------------------------------------------

def relu(a):
    a = as_tensor(a)
    return _record(np.maximum(a.data, 0.0), (a,), lambda g: (g * (a.data > 0),))


def sigmoid(a):
    a = as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _record(out, (a,), lambda g: (g * out * (1.0 - out),))


def softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _record(out, (a,), vjp)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize over the last axis, then scale and shift."""
    mu = mean(x, axis=-1, keepdims=True)
    xc = sub(x, mu)
    var = mean(mul(xc, xc), axis=-1, keepdims=True)
    y = div(xc, sqrt(add(var, eps)))
    return add(mul(y, gamma), beta)


def l2_normalize(a, axis=-1, eps=1e-12):
    a = as_tensor(a)
    n = sqrt(add(sum_(mul(a, a), axis=axis, keepdims=True), eps))
    return div(a, n)


# --- shape ops ---------------------------------------------------------------

def reshape(a, shape):
    a = as_tensor(a)
    old = a.data.shape
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a, axes=None):
    a = as_tensor(a)
    if axes is None:
        axes_fwd = tuple(reversed(range(a.data.ndim)))
    else:
        axes_fwd = tuple(axes)
    inv = np.argsort(axes_fwd)
    return _record(a.data.transpose(axes_fwd), (a,), lambda g: (g.transpose(inv),))


def getitem(a, key):
    a = as_tensor(a)

    def vjp(g):
        gx = np.zeros_like(a.data)
        np.add.at(gx, key, g)
        return (gx,)

    return _record(a.data[key], (a,), vjp)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return _record(np.concatenate([t.data for t in tensors], axis=axis), tensors, vjp)


def broadcast_to(a, shape):
    a = as_tensor(a)
    return _record(np.broadcast_to(a.data, shape).copy(), (a,),
                   lambda g: (_unbroadcast(g, a.data.shape),))


def take_rows(a, indices):
    """Row lookup a[indices]; backward scatter-adds (embedding-table gather)."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)

    def vjp(g):
        gx = np.zeros_like(a.data)
        np.add.at(gx, idx, g)
        return (gx,)

    return _record(a.data[idx], (a,), vjp)


def pad2d(a, pads):
    """Zero-pad the last two axes of a (C, H, W) tensor: pads=(top, bottom, left, right)."""
    a = as_tensor(a)
    t, b, l, r = pads
    out = np.pad(a.data, ((0, 0), (t, b), (l, r)))
    h, w = a.data.shape[1], a.data.shape[2]

    def vjp(g):
        return (np.ascontiguousarray(g[:, t:t + h, l:l + w]),)

    return _record(out, (a,), vjp)


# --- spatial ops (kernel-backed) ----------------------------------------------

def conv2d(x, w, b=None, stride=1, padding="same"):
    """2-D convolution on (C, H, W) with weight (O, C, kh, kw).

    padding="same" keeps spatial dims at stride 1 (odd kernels only);
    an integer pads both axes symmetrically.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 3 or w.data.ndim != 4:
        raise ShapeMismatch(f"conv2d expects (C,H,W) and (O,C,kh,kw), got {x.data.shape}, {w.data.shape}")
    if x.data.shape[0] != w.data.shape[1]:
        raise ShapeMismatch(f"conv2d channel mismatch: input {x.data.shape} vs weight {w.data.shape}")
    kh, kw = w.data.shape[2], w.data.shape[3]
    if padding == "same":
        ph, pw = kh // 2, kw // 2
    else:
        ph = pw = int(padding)
    xd = np.ascontiguousarray(x.data)
    wd = np.ascontiguousarray(w.data)
    y = np.asarray(kernels.conv2d_fwd(xd, wd, stride, ph, pw))

    def vjp(g):
        g = np.ascontiguousarray(g)
        gx = np.asarray(kernels.conv2d_bwd_input(g, wd, stride, ph, pw,
                                                 xd.shape[1], xd.shape[2]))
        gw = np.asarray(kernels.conv2d_bwd_weight(xd, g, stride, ph, pw, kh, kw))
        return gx, gw

    out = _record(y, (x, w), vjp)
    if b is not None:
        out = add(out, reshape(as_tensor(b), (-1, 1, 1)))
    return out


def max_pool2d(x, size=2, stride=None):
    x = as_tensor(x)
    if x.data.ndim != 3:
        raise ShapeMismatch(f"max_pool2d expects (C,H,W), got {x.data.shape}")
    stride = size if stride is None else stride
    xd = np.ascontiguousarray(x.data)
    y, idx = kernels.maxpool2d_fwd(xd, size, stride)

    def vjp(g):
        g = np.ascontiguousarray(g)
        return (np.asarray(kernels.maxpool2d_bwd(g, idx, xd.shape[1], xd.shape[2])),)

    return _record(np.asarray(y), (x,), vjp)


def up_sample2d(x, factor=2):
    """Nearest-neighbor upsampling of (C, H, W) by an integer factor."""
    x = as_tensor(x)
    if x.data.ndim != 3:
        raise ShapeMismatch(f"up_sample2d expects (C,H,W), got {x.data.shape}")
    c, h, w = x.data.shape
    out = x.data.repeat(factor, axis=1).repeat(factor, axis=2)

    def vjp(g):
        return (g.reshape(c, h, factor, w, factor).sum(axis=(2, 4)),)

    return _record(out, (x,), vjp)
