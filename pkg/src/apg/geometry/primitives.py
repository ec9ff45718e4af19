"""Exact signed distances, areas, volumes and surface samplers for primitives.

Sign convention for the whole repo: negative inside. All functions are
vectorized over an (N, 3) array of query points, float64 throughout.

Each primitive interprets the per-axis scale vector in its canonical frame:

    sphere    radius = sx                       (exact iff sx == sy == sz)
    box       half extents = (sx, sy, sz)       (always exact)
    cylinder  radius = sx, half height = sy     (axis = local y; exact iff sx == sz)
    capsule   radius = sx, core half len = sy   (axis = local y; exact iff sx == sz)
    torus     major R = sx, minor r = sy        (in local xz; exact iff sx == sz, sy < sx)

Rigid poses never break exactness (the query is inverse-transformed). A scale
outside the canonical family falls back to min-scale normalization, which
yields a tight lower bound on the true distance rather than the exact value.
"""

from __future__ import annotations

import numpy as np

KINDS = ("sphere", "box", "cylinder", "capsule", "torus")

_EXACT_TOL = 1e-12


def _is_canonical(kind: str, scale: np.ndarray) -> bool:
    sx, sy, sz = scale
    if kind == "box":
        return True
    if kind == "sphere":
        return abs(sx - sy) < _EXACT_TOL and abs(sx - sz) < _EXACT_TOL
    if kind in ("cylinder", "capsule"):
        return abs(sx - sz) < _EXACT_TOL
    if kind == "torus":
        return abs(sx - sz) < _EXACT_TOL and sy < sx
    raise ValueError(f"unknown primitive kind: {kind}")


def _sdf_canonical(kind: str, scale: np.ndarray, p: np.ndarray) -> np.ndarray:
    sx, sy, sz = scale
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    if kind == "sphere":
        return np.sqrt(x * x + y * y + z * z) - sx
    if kind == "box":
        q = np.abs(p) - np.array([sx, sy, sz])
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return outside + inside
    if kind == "cylinder":
        dr = np.hypot(x, z) - sx
        dy = np.abs(y) - sy
        outside = np.hypot(np.maximum(dr, 0.0), np.maximum(dy, 0.0))
        inside = np.minimum(np.maximum(dr, dy), 0.0)
        return outside + inside
    if kind == "capsule":
        yy = y - np.clip(y, -sy, sy)
        return np.sqrt(x * x + yy * yy + z * z) - sx
    if kind == "torus":
        qx = np.hypot(x, z) - sx
        return np.hypot(qx, y) - sy
    raise ValueError(f"unknown primitive kind: {kind}")


def primitive_sdf_local(kind: str, scale, p: np.ndarray) -> np.ndarray:
    """Signed distance in the primitive's local frame."""
    scale = np.asarray(scale, dtype=np.float64)
    if np.any(scale <= 0):
        raise ValueError(f"primitive scale must be strictly positive, got {scale}")
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    if _is_canonical(kind, scale):
        return _sdf_canonical(kind, scale, p)
    # Lower-bound fallback for anisotropic cases: unit shape, min-scale metric.
    smin = scale.min()
    unit = np.array([1.0, 1.0, 1.0])
    if kind == "torus":
        unit = np.array([1.0, 0.25, 1.0])
    return _sdf_canonical(kind, unit, p / scale) * smin


def primitive_sdf(kind: str, rotation, translation, scale, p: np.ndarray) -> np.ndarray:
    """Signed distance of a rigidly posed, scaled primitive at world points."""
    rotation = np.asarray(rotation, dtype=np.float64)
    translation = np.asarray(translation, dtype=np.float64)
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    local = (p - translation) @ rotation  # R^T (p - t), rows are points
    return primitive_sdf_local(kind, scale, local)


def primitive_volume(kind: str, scale) -> float:
    sx, sy, sz = np.asarray(scale, dtype=np.float64)
    if kind == "sphere":
        return float(4.0 / 3.0 * np.pi * sx * sy * sz)
    if kind == "box":
        return float(8.0 * sx * sy * sz)
    if kind == "cylinder":
        return float(2.0 * np.pi * sx * sz * sy)
    if kind == "capsule":
        r = sx
        return float(np.pi * r * r * (2.0 * sy) + 4.0 / 3.0 * np.pi * r ** 3)
    if kind == "torus":
        return float(2.0 * np.pi ** 2 * sx * sy * sy)
    raise ValueError(f"unknown primitive kind: {kind}")


def primitive_area(kind: str, scale) -> float:
    """Surface area (canonical interpretation of the scale)."""
    sx, sy, sz = np.asarray(scale, dtype=np.float64)
    if kind == "sphere":
        return float(4.0 * np.pi * sx * sx)
    if kind == "box":
        return float(8.0 * (sx * sy + sy * sz + sz * sx))
    if kind == "cylinder":
        return float(2.0 * np.pi * sx * (2.0 * sy) + 2.0 * np.pi * sx * sx)
    if kind == "capsule":
        return float(2.0 * np.pi * sx * (2.0 * sy) + 4.0 * np.pi * sx * sx)
    if kind == "torus":
        return float(4.0 * np.pi ** 2 * sx * sy)
    raise ValueError(f"unknown primitive kind: {kind}")


def _sample_canonical(kind: str, scale: np.ndarray, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Area-weighted surface points and unit normals in the local frame."""
    sx, sy, sz = scale
    if kind == "sphere":
        d = rng.standard_normal((n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return d * sx, d

    if kind == "box":
        h = np.array([sx, sy, sz])
        face_areas = np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy]) * 4.0
        faces = rng.choice(6, size=n, p=face_areas / face_areas.sum())
        uv = rng.uniform(-1.0, 1.0, size=(n, 2))
        pts = np.empty((n, 3))
        nrm = np.zeros((n, 3))
        axis = faces // 2
        sign = np.where(faces % 2 == 0, 1.0, -1.0)
        others = np.array([[1, 2], [0, 2], [0, 1]])
        for a in range(3):
            m = axis == a
            pts[m, a] = sign[m] * h[a]
            pts[m, others[a][0]] = uv[m, 0] * h[others[a][0]]
            pts[m, others[a][1]] = uv[m, 1] * h[others[a][1]]
            nrm[m, a] = sign[m]
        return pts, nrm

    if kind == "cylinder":
        r, h = sx, sy
        a_side = 2.0 * np.pi * r * 2.0 * h
        a_cap = np.pi * r * r
        which = rng.choice(3, size=n, p=np.array([a_side, a_cap, a_cap]) / (a_side + 2 * a_cap))
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        pts = np.empty((n, 3))
        nrm = np.zeros((n, 3))
        side = which == 0
        pts[side] = np.c_[r * np.cos(theta[side]), rng.uniform(-h, h, size=side.sum()), r * np.sin(theta[side])]
        nrm[side] = np.c_[np.cos(theta[side]), np.zeros(side.sum()), np.sin(theta[side])]
        for wi, ys in ((1, 1.0), (2, -1.0)):
            m = which == wi
            rad = r * np.sqrt(rng.uniform(0.0, 1.0, size=m.sum()))
            pts[m] = np.c_[rad * np.cos(theta[m]), np.full(m.sum(), ys * h), rad * np.sin(theta[m])]
            nrm[m, 1] = ys
        return pts, nrm

    if kind == "capsule":
        r, h = sx, sy
        a_side = 2.0 * np.pi * r * 2.0 * h
        a_sph = 4.0 * np.pi * r * r
        side = rng.uniform(size=n) < a_side / (a_side + a_sph)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        pts = np.empty((n, 3))
        nrm = np.empty((n, 3))
        ns = side.sum()
        pts[side] = np.c_[r * np.cos(theta[side]), rng.uniform(-h, h, size=ns), r * np.sin(theta[side])]
        nrm[side] = np.c_[np.cos(theta[side]), np.zeros(ns), np.sin(theta[side])]
        m = ~side
        d = rng.standard_normal((m.sum(), 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        centers = np.where(d[:, 1] >= 0, h, -h)
        pts[m] = d * r + np.c_[np.zeros(m.sum()), centers, np.zeros(m.sum())]
        nrm[m] = d
        return pts, nrm

    if kind == "torus":
        R, r = sx, sy
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        # Rejection on the minor angle: area element is proportional to R + r*cos(phi).
        phi = np.empty(n)
        remaining = np.arange(n)
        while remaining.size:
            cand = rng.uniform(0.0, 2.0 * np.pi, size=remaining.size)
            accept = rng.uniform(size=remaining.size) < (R + r * np.cos(cand)) / (R + r)
            phi[remaining[accept]] = cand[accept]
            remaining = remaining[~accept]
        ring = R + r * np.cos(phi)
        pts = np.c_[ring * np.cos(theta), r * np.sin(phi), ring * np.sin(theta)]
        nrm = np.c_[np.cos(phi) * np.cos(theta), np.sin(phi), np.cos(phi) * np.sin(theta)]
        return pts, nrm

    raise ValueError(f"unknown primitive kind: {kind}")


def primitive_surface_sample(kind: str, rotation, translation, scale, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """World-frame area-weighted surface samples with exact unit normals."""
    scale = np.asarray(scale, dtype=np.float64)
    rotation = np.asarray(rotation, dtype=np.float64)
    translation = np.asarray(translation, dtype=np.float64)
    pts, nrm = _sample_canonical(kind, scale, n, rng)
    return pts @ rotation.T + translation, nrm @ rotation.T


def primitive_aabb(kind: str, rotation, translation, scale) -> tuple[np.ndarray, np.ndarray]:
    """Conservative world-frame axis-aligned bounding box."""
    scale = np.asarray(scale, dtype=np.float64)
    rotation = np.asarray(rotation, dtype=np.float64)
    translation = np.asarray(translation, dtype=np.float64)
    sx, sy, sz = scale
    if kind == "sphere":
        half = np.full(3, sx)
    elif kind == "box":
        half = np.abs(rotation) @ scale
    elif kind == "cylinder":
        half = np.abs(rotation) @ np.array([sx, sy, sx])
    elif kind == "capsule":
        half = np.abs(rotation) @ np.array([sx, sy + sx, sx])
    else:  # torus
        half = np.abs(rotation) @ np.array([sx + sy, sy, sx + sy])
    return translation - half, translation + half
