"""Signed-distance field evaluators (negative inside, everywhere in the repo)."""

from __future__ import annotations

import numpy as np

from .primitives import primitive_sdf


class SdfField:
    """Pure evaluator mapping (N, 3) points to (N,) signed distances."""

    provenance = "abstract"

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.evaluate(pts)


class ConstantField(SdfField):
    """Uniform distance; +value for the empty shape convention."""

    provenance = "analytic-primitive"

    def __init__(self, value: float):
        self.value = float(value)

    def evaluate(self, pts):
        pts = np.atleast_2d(pts)
        return np.full(pts.shape[0], self.value, dtype=np.float64)


class PrimitiveField(SdfField):
    provenance = "analytic-primitive"

    def __init__(self, kind: str, rotation, translation, scale):
        self.kind = kind
        self.rotation = np.asarray(rotation, dtype=np.float64)
        self.translation = np.asarray(translation, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)

    def evaluate(self, pts):
        return primitive_sdf(self.kind, self.rotation, self.translation, self.scale, pts)


class UnionField(SdfField):
    """Pointwise minimum over member fields."""

    provenance = "union"

    def __init__(self, members):
        self.members = list(members)
        if not self.members:
            raise ValueError("union of zero fields is undefined; use ConstantField")

    def evaluate(self, pts):
        out = self.members[0].evaluate(pts)
        for m in self.members[1:]:
            np.minimum(out, m.evaluate(pts), out=out)
        return out


class FuncField(SdfField):
    """Adapter for an arbitrary (N,3)->(N,) callable (e.g. a decoded latent)."""

    def __init__(self, fn, provenance: str = "decoded-latent"):
        self._fn = fn
        self.provenance = provenance

    def evaluate(self, pts):
        return np.asarray(self._fn(np.atleast_2d(pts)), dtype=np.float64)


def sdf_gradient(field: SdfField, pts: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of a field, (N, 3)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    g = np.empty_like(pts)
    for axis in range(3):
        dp = np.zeros(3)
        dp[axis] = h
        g[:, axis] = (field.evaluate(pts + dp) - field.evaluate(pts - dp)) / (2.0 * h)
    return g


def sdf_normals(field: SdfField, pts: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Unit normals from the finite-difference gradient."""
    g = sdf_gradient(field, pts, h)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    return g / np.maximum(norms, 1e-12)
