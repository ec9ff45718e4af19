"""Part fusion: decode each part to a mesh, union-sample, re-encode.

The fused latent has exactly M tokens regardless of how many parts went in;
fusing nothing (or only empty parts) yields the canonical all-zeros latent.
"""

from __future__ import annotations

import numpy as np

from ..geometry import TriangleMesh, marching_cubes, sample_mesh_surface
from ..rng import make_rng
from .latent import LatentSet
from .model import ShapeVae

FUSE_RESOLUTION = 96


def _allocate(total: int, weights: np.ndarray) -> np.ndarray:
    """Largest-remainder allocation of `total` samples by weight."""
    raw = weights / weights.sum() * total
    counts = np.floor(raw).astype(int)
    short = total - counts.sum()
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def part_mesh(vae: ShapeVae, z: LatentSet, resolution: int = FUSE_RESOLUTION) -> TriangleMesh:
    return marching_cubes(vae.latent_field(z), resolution)


def fuse(parts: list[LatentSet], vae: ShapeVae, n_points: int | None = None,
         resolution: int = FUSE_RESOLUTION, seed: int = 0,
         meshes: list[TriangleMesh | None] | None = None) -> LatentSet:
    """Fuse part latents into a single M-token latent.

    `meshes` may carry precomputed decodes of the corresponding parts (the
    autoregressive loop caches them); missing entries are decoded here.
    """
    c = vae.config
    n_points = n_points or c.input_points
    decoded = []
    for i, z in enumerate(parts):
        if z.is_empty():
            continue
        mesh = meshes[i] if meshes is not None and meshes[i] is not None else None
        if mesh is None:
            mesh = part_mesh(vae, z, resolution)
        if not mesh.is_empty():
            decoded.append(mesh)
    if not decoded:
        return LatentSet.zeros(c.latent_tokens, c.latent_dim, provenance="fused")

    areas = np.array([m.area() for m in decoded])
    counts = _allocate(n_points, areas)
    pts, nrm = [], []
    for i, (mesh, k) in enumerate(zip(decoded, counts)):
        if k == 0:
            continue
        p, n = sample_mesh_surface(mesh, int(k), make_rng(seed, "fuse", i))
        pts.append(p)
        nrm.append(n)
    z = vae.encode(np.concatenate(pts), np.concatenate(nrm), mode="deterministic")
    z.provenance = "fused"
    return z
