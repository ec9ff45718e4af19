"""Isosurface extraction and field surface sampling."""

from __future__ import annotations

import numpy as np
from skimage.measure import marching_cubes as _sk_marching_cubes

from .fields import SdfField
from .mesh import TriangleMesh, sample_mesh_surface
from .voxel import DEFAULT_BOUNDS


def field_grid(fld: SdfField, resolution: int, bounds=DEFAULT_BOUNDS,
               chunk: int = 131072) -> np.ndarray:
    """Field sampled on the (res+1)^3 corner lattice spanning the bounds."""
    lo = np.asarray(bounds[0], float)
    hi = np.asarray(bounds[1], float)
    axes = [np.linspace(lo[i], hi[i], resolution + 1) for i in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    vals = np.empty(len(pts))
    for i in range(0, len(pts), chunk):
        vals[i:i + chunk] = fld.evaluate(pts[i:i + chunk])
    return vals.reshape(resolution + 1, resolution + 1, resolution + 1)


def marching_cubes(fld: SdfField, resolution: int = 64, bounds=DEFAULT_BOUNDS) -> TriangleMesh:
    """Triangulated zero level set; empty mesh when the field has one sign.

    Every output vertex lies on a lattice edge with a sign change, at the
    linearly interpolated zero crossing.
    """
    vol = field_grid(fld, resolution, bounds)
    if not np.isfinite(vol).all():
        raise ValueError("field is not finite on the marching-cubes grid")
    if vol.min() > 0.0 or vol.max() < 0.0:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    # Exact zeros at lattice points create degenerate triangles; nudge them.
    vol = np.where(vol == 0.0, 1e-12, vol)
    lo = np.asarray(bounds[0], float)
    hi = np.asarray(bounds[1], float)
    spacing = (hi - lo) / resolution
    verts, faces, _, _ = _sk_marching_cubes(vol, level=0.0, spacing=tuple(spacing))
    return TriangleMesh(verts + lo, faces.astype(np.int64))


def sample_field_surface(fld: SdfField, count: int, rng, resolution: int = 96,
                         bounds=DEFAULT_BOUNDS) -> tuple[np.ndarray, np.ndarray]:
    """Area-weighted samples of a field's surface via its marching-cubes mesh.

    Raises ValueError on an empty surface (the empty-shape signal consumed
    by end-of-parts detection).
    """
    mesh = marching_cubes(fld, resolution, bounds)
    if mesh.is_empty():
        raise ValueError("field has an empty surface")
    return sample_mesh_surface(mesh, count, rng)
