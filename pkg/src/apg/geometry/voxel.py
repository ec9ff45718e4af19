"""Occupancy grids and voxelization (inside = SDF <= 0 at the voxel center)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import SdfField
from .mesh import TriangleMesh

DEFAULT_BOUNDS = (np.array([-1.0, -1.0, -1.0]), np.array([1.0, 1.0, 1.0]))


@dataclass
class VoxelGrid:
    occupancy: np.ndarray  # (r, r, r) bool
    bounds_min: np.ndarray = field(default_factory=lambda: DEFAULT_BOUNDS[0].copy())
    bounds_max: np.ndarray = field(default_factory=lambda: DEFAULT_BOUNDS[1].copy())

    @property
    def resolution(self) -> int:
        return self.occupancy.shape[0]

    def count(self) -> int:
        return int(self.occupancy.sum())

    def same_lattice(self, other: "VoxelGrid") -> bool:
        return (self.occupancy.shape == other.occupancy.shape
                and np.allclose(self.bounds_min, other.bounds_min)
                and np.allclose(self.bounds_max, other.bounds_max))


def voxel_centers(resolution: int, bounds=DEFAULT_BOUNDS) -> np.ndarray:
    """(r^3, 3) array of voxel-center coordinates, x fastest varying last."""
    lo, hi = np.asarray(bounds[0], float), np.asarray(bounds[1], float)
    cell = (hi - lo) / resolution
    axes = [lo[i] + (np.arange(resolution) + 0.5) * cell[i] for i in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    return np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)


def voxelize(fld: SdfField, resolution: int = 64, bounds=DEFAULT_BOUNDS,
             chunk: int = 65536) -> VoxelGrid:
    """Occupancy by evaluating the field at voxel centers."""
    centers = voxel_centers(resolution, bounds)
    occ = np.empty(len(centers), dtype=bool)
    for i in range(0, len(centers), chunk):
        occ[i:i + chunk] = fld.evaluate(centers[i:i + chunk]) <= 0.0
    return VoxelGrid(occ.reshape(resolution, resolution, resolution),
                     np.asarray(bounds[0], float), np.asarray(bounds[1], float))


def voxelize_mesh(mesh: TriangleMesh, resolution: int = 64, bounds=DEFAULT_BOUNDS) -> VoxelGrid:
    """Occupancy of a watertight mesh by per-row +x ray-crossing parity.

    All voxel centers in one x-row share a ray, so crossings are collected
    once per row and occupancy falls out of a sorted-crossing parity scan.
    """
    if not mesh.is_watertight():
        raise ValueError("mesh is not watertight: occupancy is undefined")
    lo = np.asarray(bounds[0], float)
    hi = np.asarray(bounds[1], float)
    r = resolution
    cell = (hi - lo) / r
    ys = lo[1] + (np.arange(r) + 0.5) * cell[1] + 9.5367431640625e-07
    zs = lo[2] + (np.arange(r) + 0.5) * cell[2] + 6.618591837692261e-07
    xs = lo[0] + (np.arange(r) + 0.5) * cell[0]

    crossings = [[[] for _ in range(r)] for _ in range(r)]  # [j][k] -> x values
    a, b, c = mesh.corners()
    for t in range(mesh.num_triangles):
        ta, tb, tc = a[t], b[t], c[t]
        ymin = min(ta[1], tb[1], tc[1])
        ymax = max(ta[1], tb[1], tc[1])
        zmin = min(ta[2], tb[2], tc[2])
        zmax = max(ta[2], tb[2], tc[2])
        j0 = int(np.searchsorted(ys, ymin, side="left"))
        j1 = int(np.searchsorted(ys, ymax, side="right"))
        k0 = int(np.searchsorted(zs, zmin, side="left"))
        k1 = int(np.searchsorted(zs, zmax, side="right"))
        if j0 >= j1 or k0 >= k1:
            continue
        yy, zz = np.meshgrid(ys[j0:j1], zs[k0:k1], indexing="ij")
        yy = yy.ravel()
        zz = zz.ravel()
        e0 = (ta[1] - yy) * (tb[2] - zz) - (ta[2] - zz) * (tb[1] - yy)
        e1 = (tb[1] - yy) * (tc[2] - zz) - (tb[2] - zz) * (tc[1] - yy)
        e2 = (tc[1] - yy) * (ta[2] - zz) - (tc[2] - zz) * (ta[1] - yy)
        inside = ((e0 > 0) & (e1 > 0) & (e2 > 0)) | ((e0 < 0) & (e1 < 0) & (e2 < 0))
        if not inside.any():
            continue
        denom = e0 + e1 + e2
        with np.errstate(divide="ignore", invalid="ignore"):
            x_hit = (e1 * ta[0] + e2 * tb[0] + e0 * tc[0]) / denom
        idx = np.flatnonzero(inside)
        jj = j0 + idx // (k1 - k0)
        kk = k0 + idx % (k1 - k0)
        for m, j, k in zip(idx, jj, kk):
            crossings[j][k].append(x_hit[m])

    occ = np.zeros((r, r, r), dtype=bool)
    for j in range(r):
        for k in range(r):
            xh = crossings[j][k]
            if not xh:
                continue
            xh = np.sort(np.asarray(xh))
            # Center is inside when an odd number of crossings lie to its right.
            n_right = len(xh) - np.searchsorted(xh, xs, side="right")
            occ[:, j, k] = (n_right % 2) == 1
    return VoxelGrid(occ, lo.copy(), hi.copy())


def brute_force_voxelize(fld: SdfField, resolution: int = 64, bounds=DEFAULT_BOUNDS) -> VoxelGrid:
    """Unchunked center-in-shape test; the oracle voxelizer for tests."""
    centers = voxel_centers(resolution, bounds)
    occ = fld.evaluate(centers) <= 0.0
    return VoxelGrid(occ.reshape(resolution, resolution, resolution),
                     np.asarray(bounds[0], float), np.asarray(bounds[1], float))
