"""Dense float32 tensors with define-by-run reverse-mode autodiff.

The engine is deliberately small: numpy arrays for storage and BLAS, a flat
tape rebuilt on every forward pass, and analytic backward closures per op.
Reductions (sum/mean) accumulate in float64 before casting back to float32.

Broadcasting rule (the only one, documented here once): operand shapes are
aligned from the trailing dimension; each aligned pair of extents must be
equal or 1. This is numpy's right-aligned rule with no implicit reshapes;
gradients of broadcast operands are summed back over the broadcast axes.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

_INV_SQRT2 = float(1.0 / np.sqrt(2.0))
_INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


class ShapeError(ValueError):
    """Raised when operand shapes do not conform."""


class Tensor:
    """A float32 array plus an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.astype(np.float32, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Arithmetic operators delegate to the module-level ops.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)


class Tape:
    """Ordered record of ops from one forward pass, walked once backward."""

    def __init__(self):
        self.nodes = []  # (out, parents, backward_fn), appended in topological order

    def __enter__(self):
        global _ACTIVE
        if _ACTIVE is not None:
            raise RuntimeError("a tape is already active (one tape per step)")
        _ACTIVE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE
        _ACTIVE = None
        return False

    def backward(self, loss: Tensor):
        """Accumulate d(loss)/d(input) into .grad of every contributing leaf."""
        if loss.data.shape != ():
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        grads = {id(loss): np.ones((), dtype=np.float32)}
        owners = {id(loss): loss}
        for out, parents, backward in reversed(self.nodes):
            g = grads.pop(id(out), None)
            owners.pop(id(out), None)
            if g is None:
                continue
            for parent, pg in zip(parents, backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pg = np.asarray(pg, dtype=np.float32)
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
                    owners[key] = parent
        # Whatever was never popped is a leaf (a parameter or an input).
        for key, g in grads.items():
            owners[key]._accumulate(g)


_ACTIVE: Tape | None = None


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))


def _record(out_data: np.ndarray, parents: tuple, backward) -> Tensor:
    req = any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=req and _ACTIVE is not None)
    if out.requires_grad:
        _ACTIVE.nodes.append((out, parents, backward))
    return out


def _needs(parents: tuple) -> tuple:
    """Which parents want gradients (lets closures skip dead computations)."""
    return tuple(p.requires_grad for p in parents)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient back to the shape of a broadcast operand."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _check_broadcast(a: np.ndarray, b: np.ndarray, opname: str):
    for da, db in zip(a.shape[::-1], b.shape[::-1]):
        if da != db and da != 1 and db != 1:
            raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} do not conform")


# ---------------------------------------------------------------------------
# elementwise binary ops
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "add")
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _record(out, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "sub")
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _record(out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "mul")
    out = a.data * b.data

    def backward(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return _record(out, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "div")
    inv = 1.0 / b.data
    out = a.data * inv

    def backward(g):
        return (
            _unbroadcast(g * inv, a.data.shape),
            _unbroadcast(-g * out * inv, b.data.shape),
        )

    return _record(out, (a, b), backward)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        return (-g,)

    return _record(-a.data, (a,), backward)


def maximum(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "maximum")
    out = np.maximum(a.data, b.data)
    mask = (a.data >= b.data).astype(np.float32)

    def backward(g):
        return _unbroadcast(g * mask, a.data.shape), _unbroadcast(g * (1.0 - mask), b.data.shape)

    return _record(out, (a, b), backward)


# ---------------------------------------------------------------------------
# matmul
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
        raise ShapeError(f"matmul: inner dims differ, {a.data.shape} @ {b.data.shape}")
    out = np.matmul(a.data, b.data)
    need = _needs((a, b))

    def backward(g):
        ga = gb = None
        if need[0]:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2)) if b.data.ndim > 1 else np.multiply.outer(g, b.data)
            ga = _unbroadcast(ga, a.data.shape)
        if need[1]:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.data.shape)
        return ga, gb

    return _record(out, (a, b), backward)


def linear(x, w, b) -> Tensor:
    """Fused x @ w + b for (..., in) inputs and (in, out) weights."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.shape[-1] != w.data.shape[0]:
        raise ShapeError(f"linear: {x.data.shape} @ {w.data.shape}")
    out = np.matmul(x.data, w.data)
    out += b.data
    need = _needs((x, w, b))

    def backward(g):
        gx = gw = gb = None
        if need[0]:
            gx = np.matmul(g, w.data.T)
        if need[1] or need[2]:
            g2 = g.reshape(-1, g.shape[-1])
            if need[1]:
                gw = x.data.reshape(-1, x.data.shape[-1]).T @ g2
            if need[2]:
                gb = g2.sum(axis=0, dtype=np.float64).astype(np.float32)
        return gx, gw, gb

    return _record(out, (x, w, b), backward)


# ---------------------------------------------------------------------------
# reductions (float64 accumulation)
# ---------------------------------------------------------------------------

def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims, dtype=np.float64).astype(np.float32)

    def backward(g):
        gg = g
        if not keepdims and axis is not None:
            gg = np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).astype(np.float32),)

    return _record(out, (a,), backward)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims, dtype=np.float64).astype(np.float32)
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= a.data.shape[ax]
    inv = np.float32(1.0 / count)

    def backward(g):
        gg = g
        if not keepdims and axis is not None:
            gg = np.expand_dims(g, axis)
        return (np.broadcast_to(gg * inv, a.data.shape).astype(np.float32),)

    return _record(out, (a,), backward)


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------

def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    out = a.data.reshape(shape)
    old = a.data.shape

    def backward(g):
        return (g.reshape(old),)

    return _record(out, (a,), backward)


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = np.ascontiguousarray(a.data.transpose(axes))

    def backward(g):
        return (g.transpose(inv),)

    return _record(out, (a,), backward)


def concat(parts, axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(out, tuple(parts), backward)


def slice_axis(a, axis: int, start: int, stop: int) -> Tensor:
    a = _as_tensor(a)
    key = [slice(None)] * a.data.ndim
    key[axis] = slice(start, stop)
    key = tuple(key)
    out = np.ascontiguousarray(a.data[key])

    def backward(g):
        full = np.zeros_like(a.data)
        full[key] = g
        return (full,)

    return _record(out, (a,), backward)


def broadcast_to(a, shape) -> Tensor:
    a = _as_tensor(a)
    out = np.broadcast_to(a.data, shape).copy()
    old = a.data.shape

    def backward(g):
        return (_unbroadcast(g, old),)

    return _record(out, (a,), backward)


# ---------------------------------------------------------------------------
# elementwise unary ops
# ---------------------------------------------------------------------------

def _unary(a, out, dfn) -> Tensor:
    def backward(g):
        return (g * dfn(),)

    return _record(out, (a,), backward)


def texp(a) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)
    return _unary(a, out, lambda: out)


def tlog(a) -> Tensor:
    a = _as_tensor(a)
    out = np.log(a.data)
    return _unary(a, out, lambda: 1.0 / a.data)


def tsqrt(a) -> Tensor:
    a = _as_tensor(a)
    out = np.sqrt(a.data)
    return _unary(a, out, lambda: 0.5 / out)


def ttanh(a) -> Tensor:
    a = _as_tensor(a)
    out = np.tanh(a.data)
    return _unary(a, out, lambda: 1.0 - out * out)


def tsin(a) -> Tensor:
    a = _as_tensor(a)
    return _unary(a, np.sin(a.data), lambda: np.cos(a.data))


def tcos(a) -> Tensor:
    a = _as_tensor(a)
    return _unary(a, np.cos(a.data), lambda: -np.sin(a.data))


def tabs(a) -> Tensor:
    a = _as_tensor(a)
    return _unary(a, np.abs(a.data), lambda: np.sign(a.data))


def terf(a) -> Tensor:
    a = _as_tensor(a)
    out = _erf(a.data).astype(np.float32)
    # d/dx erf(x) = 2/sqrt(pi) * exp(-x^2)
    return _unary(a, out, lambda: np.float32(2.0 / np.sqrt(np.pi)) * np.exp(-a.data * a.data))


def gelu(a) -> Tensor:
    """Exact GELU, x * Phi(x), with analytic backward."""
    a = _as_tensor(a)
    x = a.data
    phi_cdf = 0.5 * (1.0 + _erf(x * _INV_SQRT2))
    out = (x * phi_cdf).astype(np.float32)

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        return (g * (phi_cdf + x * pdf).astype(np.float32),)

    return _record(out, (a,), backward)


def gelu_grad(a) -> Tensor:
    """GELU'(x) as a differentiable value (used by spatial-gradient streams)."""
    a = _as_tensor(a)
    x = a.data
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    out = (0.5 * (1.0 + _erf(x * _INV_SQRT2)) + x * pdf).astype(np.float32)

    def backward(g):
        # GELU''(x) = pdf(x) * (2 - x^2)
        return (g * (pdf * (2.0 - x * x)).astype(np.float32),)

    return _record(out, (a,), backward)


def softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=axis, keepdims=True, dtype=np.float64).astype(np.float32)
    out = out.astype(np.float32)

    def backward(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _record(out, (a,), backward)


def square(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        return (g * (2.0 * a.data),)

    return _record(a.data * a.data, (a,), backward)


# ---------------------------------------------------------------------------
# composed helpers (differentiable through the primitives above)
# ---------------------------------------------------------------------------

def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """LayerNorm over the last axis, composed from primitives."""
    mu = tmean(x, axis=-1, keepdims=True)
    c = sub(x, mu)
    var = tmean(square(c), axis=-1, keepdims=True)
    sigma = tsqrt(add(var, eps))
    return add(mul(div(c, sigma), gamma), beta)


def layer_norm_stats(x: Tensor, eps: float = 1e-5):
    """LayerNorm pieces (normalized, centered, sigma) for tangent propagation."""
    mu = tmean(x, axis=-1, keepdims=True)
    c = sub(x, mu)
    var = tmean(square(c), axis=-1, keepdims=True)
    sigma = tsqrt(add(var, eps))
    return div(c, sigma), c, sigma
