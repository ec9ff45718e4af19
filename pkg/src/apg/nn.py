"""Transformer building blocks on top of the tensor engine.

Modules hold named parameters; names are the checkpoint contract, so
parameter discovery walks attributes in sorted order for determinism.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .rng import make_rng
from .tensor import Tensor


class Module:
    """Base class: parameter discovery by attribute walk."""

    def named_parameters(self, prefix: str = ""):
        out = []
        for name in sorted(vars(self)):
            value = getattr(self, name)
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                out.append((full, value))
            elif isinstance(value, Module):
                out.extend(value.named_parameters(full + "."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(item.named_parameters(f"{full}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out.append((f"{full}.{i}", item))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict):
        params = dict(self.named_parameters())
        if set(params) != set(state):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise KeyError(f"parameter name mismatch: missing={missing} extra={extra}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=np.float32)
            if arr.shape != p.data.shape:
                raise ValueError(f"{name}: shape {arr.shape} != expected {p.data.shape}")
            p.data = arr.copy()

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())


def param(rng, shape, std: float | None = None) -> Tensor:
    """Gaussian-initialized parameter; default std is 1/sqrt(fan_in)."""
    if std is None:
        fan_in = shape[0] if len(shape) > 1 else shape[0]
        std = 1.0 / np.sqrt(fan_in)
    data = (rng.standard_normal(shape) * std).astype(np.float32)
    return Tensor(data, requires_grad=True)


def zeros_param(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=np.float32), requires_grad=True)


class Linear(Module):
    def __init__(self, rng, in_dim: int, out_dim: int, std: float | None = None, zero_init: bool = False):
        if zero_init:
            self.w = zeros_param((in_dim, out_dim))
        else:
            self.w = param(rng, (in_dim, out_dim), std)
        self.b = zeros_param((out_dim,))

    def __call__(self, x: Tensor) -> Tensor:
        return T.add(T.matmul(x, self.w), self.b)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.g = Tensor(np.ones(dim, dtype=np.float32), requires_grad=True)
        self.b = zeros_param((dim,))
        self._eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.g, self.b, self._eps)


class MultiheadAttention(Module):
    """Scaled dot-product attention; cross-attention when kv differs from q."""

    def __init__(self, rng, dim: int, heads: int):
        if dim % heads:
            raise ValueError(f"width {dim} not divisible by {heads} heads")
        self.heads = heads
        self.wq = Linear(rng, dim, dim)
        self.wk = Linear(rng, dim, dim)
        self.wv = Linear(rng, dim, dim)
        self.wo = Linear(rng, dim, dim)

    def _split(self, x: Tensor, batch_shape) -> Tensor:
        # (..., S, W) -> (..., H, S, Dh)
        s, w = x.shape[-2], x.shape[-1]
        dh = w // self.heads
        x = T.reshape(x, batch_shape + (s, self.heads, dh))
        axes = tuple(range(len(batch_shape))) + (len(batch_shape) + 1, len(batch_shape), len(batch_shape) + 2)
        return T.transpose(x, axes)

    def __call__(self, q_in: Tensor, kv_in: Tensor | None = None) -> Tensor:
        kv_in = q_in if kv_in is None else kv_in
        if q_in.shape[-1] != kv_in.shape[-1]:
            raise T.ShapeError(f"attention width mismatch: {q_in.shape} vs {kv_in.shape}")
        batch_shape = q_in.shape[:-2]
        dh = q_in.shape[-1] // self.heads
        q = self._split(self.wq(q_in), batch_shape)
        k = self._split(self.wk(kv_in), batch_shape)
        v = self._split(self.wv(kv_in), batch_shape)
        nb = len(batch_shape)
        kt = T.transpose(k, tuple(range(nb)) + (nb, nb + 2, nb + 1))
        logits = T.mul(T.matmul(q, kt), 1.0 / np.sqrt(dh))
        attn = T.softmax(logits, axis=-1)
        out = T.matmul(attn, v)  # (..., H, Sq, Dh)
        out = T.transpose(out, tuple(range(nb)) + (nb + 1, nb, nb + 2))
        out = T.reshape(out, batch_shape + (q_in.shape[-2], q_in.shape[-1]))
        return self.wo(out)


class Mlp(Module):
    def __init__(self, rng, dim: int, ratio: int = 4):
        hidden = dim * ratio
        self.fc1 = Linear(rng, dim, hidden)
        self.fc2 = Linear(rng, hidden, dim)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(T.gelu(self.fc1(x)))


class AttentionBlock(Module):
    """Pre-LN residual block: attention (self or cross) followed by an MLP."""

    def __init__(self, rng, dim: int, heads: int, mlp_ratio: int = 4):
        self.ln1 = LayerNorm(dim)
        self.attn = MultiheadAttention(rng, dim, heads)
        self.ln2 = LayerNorm(dim)
        self.mlp = Mlp(rng, dim, mlp_ratio)

    def __call__(self, x: Tensor, kv: Tensor | None = None) -> Tensor:
        x = T.add(x, self.attn(self.ln1(x), kv))
        return T.add(x, self.mlp(self.ln2(x)))


class FourierFeatures:
    """Positional features [x, sin(2^o pi x), cos(2^o pi x)] per coordinate."""

    def __init__(self, octaves: int = 8):
        self.octaves = octaves
        self.freqs = (2.0 ** np.arange(octaves) * np.pi).astype(np.float32)

    @property
    def dim_per_coord(self) -> int:
        return 1 + 2 * self.octaves

    def out_dim(self, coords: int = 3) -> int:
        return coords * self.dim_per_coord

    def __call__(self, p: Tensor) -> Tensor:
        parts = [p]
        for f in self.freqs:
            scaled = T.mul(p, float(f))
            parts.append(T.tsin(scaled))
            parts.append(T.tcos(scaled))
        return T.concat(parts, axis=-1)

    def tangent(self, p: Tensor, dp: Tensor) -> Tensor:
        """Directional derivative of the features along dp (same shape as p)."""
        parts = [dp]
        for f in self.freqs:
            scaled = T.mul(p, float(f))
            parts.append(T.mul(T.mul(T.tcos(scaled), float(f)), dp))
            parts.append(T.mul(T.mul(T.neg(T.tsin(scaled)), float(f)), dp))
        return T.concat(parts, axis=-1)


def init_rng(seed: int, *tags):
    return make_rng(seed, "init", *tags)
