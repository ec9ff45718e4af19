"""Supervision bundles: 8192 surface + 8192 near-surface + 8192 volume points
per shape (the whole object and every part), with truncated oracle SDFs.

Whole-object surface samples are drawn by rejection: a candidate from one
part's exact surface is kept only if no other part strictly contains it, so
accepted points are uniform on the exposed union surface with exact normals.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..rng import make_rng
from .scene import PartSpec, SceneSpec

POINTS_PER_SECTION = 8192
TRUNCATION = 0.25
NEAR_SIGMA = (0.01, 0.05)
BUNDLE_MAGIC = b"APGBNDL1"

_BLOCKS = ("surface_pos", "surface_normal", "near_pos", "near_sdf", "vol_pos", "vol_sdf")
_BLOCK_COLS = {"surface_pos": 3, "surface_normal": 3, "near_pos": 3,
               "near_sdf": 1, "vol_pos": 3, "vol_sdf": 1}


@dataclass
class ShapeSamples:
    surface_pos: np.ndarray     # (n, 3)
    surface_normal: np.ndarray  # (n, 3)
    near_pos: np.ndarray        # (n, 3)
    near_sdf: np.ndarray        # (n,)
    vol_pos: np.ndarray         # (n, 3)
    vol_sdf: np.ndarray         # (n,)


@dataclass
class SampleBundle:
    whole: ShapeSamples
    parts: list[ShapeSamples]

    def sections(self) -> list[tuple[str, ShapeSamples]]:
        out = [("whole", self.whole)]
        out.extend((f"part_{k + 1}", s) for k, s in enumerate(self.parts))
        return out


def truncate(sdf: np.ndarray, bound: float = TRUNCATION) -> np.ndarray:
    return np.clip(sdf, -bound, bound)


def _sample_union_surface(parts: list[PartSpec], n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    from ..geometry import primitive_area
    areas = np.array([primitive_area(p.kind, p.scale) for p in parts])
    probs = areas / areas.sum()
    pts = np.empty((n, 3))
    nrm = np.empty((n, 3))
    filled = 0
    while filled < n:
        want = max(n - filled, 64)
        take = int(want * 1.5) + 16
        idx = rng.choice(len(parts), size=take, p=probs)
        cand_pts = np.empty((take, 3))
        cand_nrm = np.empty((take, 3))
        for i, p in enumerate(parts):
            m = idx == i
            if m.any():
                cand_pts[m], cand_nrm[m] = p.area_weighted_samples(int(m.sum()), rng)
        keep = np.ones(take, dtype=bool)
        for i, p in enumerate(parts):
            others = idx != i
            if others.any():
                keep[others] &= p.field().evaluate(cand_pts[others]) > -1e-9
        kept = min(int(keep.sum()), n - filled)
        sel = np.flatnonzero(keep)[:kept]
        pts[filled:filled + kept] = cand_pts[sel]
        nrm[filled:filled + kept] = cand_nrm[sel]
        filled += kept
    return pts, nrm


def _shape_samples(sample_surface, fld, seed: int, tag, n: int = POINTS_PER_SECTION) -> ShapeSamples:
    rng_surf = make_rng(seed, "bundle", tag, "surface")
    surf_pos, surf_nrm = sample_surface(n, rng_surf)

    rng_near = make_rng(seed, "bundle", tag, "near")
    base_pos, base_nrm = sample_surface(n, rng_near)
    sigma = np.where(rng_near.uniform(size=n) < 0.5, NEAR_SIGMA[0], NEAR_SIGMA[1])
    offsets = rng_near.standard_normal(n) * sigma
    near_pos = np.clip(base_pos + offsets[:, None] * base_nrm, -1.0, 1.0)
    near_sdf = truncate(fld.evaluate(near_pos))

    rng_vol = make_rng(seed, "bundle", tag, "volume")
    vol_pos = rng_vol.uniform(-1.0, 1.0, size=(n, 3))
    vol_sdf = truncate(fld.evaluate(vol_pos))
    return ShapeSamples(surf_pos, surf_nrm, near_pos, near_sdf, vol_pos, vol_sdf)


def build_bundle(scene: SceneSpec, seed: int) -> SampleBundle:
    """Per-part and whole-object supervision sets for one scene."""
    whole_field = scene.whole_field()
    whole = _shape_samples(
        lambda n, rng: _sample_union_surface(scene.parts, n, rng),
        whole_field, seed, "whole")
    parts = []
    for k, part in enumerate(scene.parts):
        parts.append(_shape_samples(part.area_weighted_samples, part.field(),
                                    seed, f"part_{k + 1}"))
    return SampleBundle(whole, parts)


# ---------------------------------------------------------------------------
# binary format: magic, then per manifest-declared section the fixed blocks
# (surface_pos, surface_normal, near_pos, near_sdf, vol_pos, vol_sdf) as
# little-endian float32 preceded by a u32 row count each.
# ---------------------------------------------------------------------------

def save_bundle(bundle: SampleBundle, path) -> list[dict]:
    """Write bundle.bin; returns the section table for the manifest."""
    table = []
    with open(path, "wb") as fh:
        fh.write(BUNDLE_MAGIC)
        for name, samples in bundle.sections():
            counts = {}
            for block in _BLOCKS:
                arr = np.ascontiguousarray(getattr(samples, block), dtype="<f4")
                rows = arr.shape[0]
                counts[block] = int(rows)
                fh.write(struct.pack("<I", rows))
                fh.write(arr.tobytes())
            table.append({"name": name, "counts": counts})
    return table


def load_bundle(path, section_table: list[dict]) -> SampleBundle:
    """Read bundle.bin in the order declared by the manifest."""
    sections = []
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != BUNDLE_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {BUNDLE_MAGIC!r}")
        for entry in section_table:
            blocks = {}
            for block in _BLOCKS:
                (rows,) = struct.unpack("<I", fh.read(4))
                if rows != entry["counts"][block]:
                    raise ValueError(f"{path}: section {entry['name']} block {block}: "
                                     f"count {rows} != manifest {entry['counts'][block]}")
                cols = _BLOCK_COLS[block]
                data = np.frombuffer(fh.read(4 * rows * cols), dtype="<f4")
                if data.size != rows * cols:
                    raise ValueError(f"{path}: truncated block {block}")
                blocks[block] = data.reshape(rows, cols) if cols > 1 else data.copy()
            sections.append(ShapeSamples(
                blocks["surface_pos"].astype(np.float64),
                blocks["surface_normal"].astype(np.float64),
                blocks["near_pos"].astype(np.float64),
                blocks["near_sdf"].astype(np.float64),
                blocks["vol_pos"].astype(np.float64),
                blocks["vol_sdf"].astype(np.float64)))
    whole = sections[0]
    return SampleBundle(whole, sections[1:])
