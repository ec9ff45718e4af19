"""Procedural primitive assemblies with exact per-part SDFs.

Scenes are built part by part: each new primitive is attached near an
already-placed one (bisection on the surface gap), keeping a spanning tree
of near-contacts. The whole assembly is then recentred and uniformly scaled
into [-0.9, 0.9]^3; uniform scaling preserves SDF exactness for every kind.

Standard and hard profiles occasionally duplicate a part and stack the twin
along the camera axis. Twins have identical amodal silhouettes, so resolving
them requires the already-generated-parts context; they exist to keep the
autoregressive conditioning informative (and are where non-autoregressive
ablations visibly fail).

Parts are stored in canonical order: descending occupancy at 32^3, ties
broken by centroid (x, then y, then z), then by generation index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import (KINDS, PrimitiveField, UnionField, primitive_aabb,
                        primitive_surface_sample, primitive_volume,
                        voxel_centers)
from ..rng import child_seed, make_rng

PROFILES = {
    "easy": (1, 3),
    "standard": (2, 6),
    "hard": (4, 10),
}

MIN_PART_VOLUME = 0.04  # 5x the end-of-parts occupancy threshold at 32^3
TWIN_PROB = 0.35
NORMALIZED_HALF_EXTENT = 0.8

_SCALE_RANGES = {
    # (low, high) per canonical scale slot, before normalization
    "sphere": ((0.30, 0.52), None, None),
    "box": ((0.24, 0.46), (0.24, 0.46), (0.24, 0.46)),
    "cylinder": ((0.24, 0.40), (0.28, 0.52), None),
    "capsule": ((0.22, 0.34), (0.22, 0.44), None),
    "torus": ((0.30, 0.46), (0.13, 0.20), None),
}


@dataclass
class PartSpec:
    kind: str
    rotation: np.ndarray   # (3, 3)
    translation: np.ndarray  # (3,)
    scale: np.ndarray      # (3,) canonical per-kind interpretation
    part_id: int

    def field(self) -> PrimitiveField:
        return PrimitiveField(self.kind, self.rotation, self.translation, self.scale)

    def volume(self) -> float:
        return primitive_volume(self.kind, self.scale)

    def area_weighted_samples(self, n: int, rng):
        return primitive_surface_sample(self.kind, self.rotation, self.translation,
                                        self.scale, n, rng)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "scale": self.scale.tolist(),
            "part_id": self.part_id,
        }

    @staticmethod
    def from_dict(d: dict) -> "PartSpec":
        return PartSpec(d["kind"], np.array(d["rotation"], dtype=np.float64),
                        np.array(d["translation"], dtype=np.float64),
                        np.array(d["scale"], dtype=np.float64), int(d["part_id"]))


@dataclass
class SceneSpec:
    asset_id: str
    seed: int
    difficulty: str
    parts: list[PartSpec] = field(default_factory=list)
    overlap_volume: float = 0.0

    @property
    def num_parts(self) -> int:
        return len(self.parts)

    def whole_field(self) -> UnionField:
        return UnionField([p.field() for p in self.parts])

    def to_dict(self) -> dict:
        return {
            "asset_id": self.asset_id,
            "seed": self.seed,
            "difficulty": self.difficulty,
            "num_parts": self.num_parts,
            "overlap_volume": self.overlap_volume,
            "parts": [p.to_dict() for p in self.parts],
        }

    @staticmethod
    def from_dict(d: dict) -> "SceneSpec":
        return SceneSpec(d["asset_id"], int(d["seed"]), d["difficulty"],
                         [PartSpec.from_dict(p) for p in d["parts"]],
                         float(d["overlap_volume"]))


def _random_rotation(rng) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _random_part(rng, part_id: int, size_factor: float) -> PartSpec:
    kind = KINDS[rng.integers(len(KINDS))]
    ranges = _SCALE_RANGES[kind]
    scale = np.empty(3)
    for i in range(3):
        r = ranges[i]
        if r is None:
            scale[i] = scale[0]  # canonical slots mirror slot 0 (sx == sz etc.)
        else:
            scale[i] = rng.uniform(r[0], r[1]) * size_factor
    if kind == "torus":
        scale[2] = scale[0]
    return PartSpec(kind, _random_rotation(rng), np.zeros(3), scale, part_id)


def _bounding_radius(part: PartSpec) -> float:
    lo, hi = primitive_aabb(part.kind, part.rotation, np.zeros(3), part.scale)
    return float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))


def _local_probe(part: PartSpec, n: int = 384) -> np.ndarray:
    """Canonical-frame surface samples (pose applied later by _gap)."""
    pts, _ = primitive_surface_sample(part.kind, np.eye(3), np.zeros(3),
                                      part.scale, n,
                                      make_rng(0, "placement-probe", part.part_id))
    return pts


def _gap(points_local: np.ndarray, rotation: np.ndarray, center: np.ndarray,
         placed_field: UnionField) -> float:
    pts = points_local @ rotation.T + center
    return float(placed_field.evaluate(pts).min())


def _assembly_extent(parts: list[PartSpec], extra: PartSpec, center: np.ndarray) -> float:
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for p in parts:
        plo, phi = primitive_aabb(p.kind, p.rotation, p.translation, p.scale)
        lo, hi = np.minimum(lo, plo), np.maximum(hi, phi)
    plo, phi = primitive_aabb(extra.kind, extra.rotation, center, extra.scale)
    lo, hi = np.minimum(lo, plo), np.maximum(hi, phi)
    return float(np.max(hi - lo))


def _place_part(part: PartSpec, placed: list[PartSpec], rng) -> bool:
    """Attach `part` near the assembly with a target surface gap; True on success.

    Several candidate directions are tried and the placement keeping the
    assembly most compact wins, so large part counts stay packed enough to
    survive normalization with healthy per-part volumes.
    """
    placed_field = UnionField([p.field() for p in placed])
    local_pts = _local_probe(part)
    centroid = np.mean([p.translation for p in placed], axis=0)
    dists = [np.linalg.norm(p.translation - centroid) for p in placed]
    anchor = placed[int(np.argmin(dists))]
    r_sum = _bounding_radius(part) + _bounding_radius(anchor) + 0.1

    best_center = None
    best_extent = np.inf
    for trial in range(12):
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        target = rng.uniform(-0.03, 0.015)
        lo_t, hi_t = 0.0, r_sum * 1.6
        if _gap(local_pts, part.rotation, anchor.translation + hi_t * direction,
                placed_field) < target:
            continue  # direction blocked by another part even at range
        for _ in range(48):
            mid = 0.5 * (lo_t + hi_t)
            g = _gap(local_pts, part.rotation, anchor.translation + mid * direction,
                     placed_field)
            if g < target:
                lo_t = mid
            else:
                hi_t = mid
        center = anchor.translation + hi_t * direction
        pts = local_pts @ part.rotation.T + center
        exposure = float((placed_field.evaluate(pts) > -1e-6).mean())
        if exposure < 0.3:
            continue
        extent = _assembly_extent(placed, part, center)
        if extent < best_extent:
            best_extent = extent
            best_center = center
        if trial >= 5 and best_center is not None:
            break
    if best_center is None:
        return False
    part.translation = best_center
    return True


def _place_twin(original: PartSpec, placed: list[PartSpec], rng, part_id: int) -> PartSpec | None:
    """Duplicate a part and stack it along the camera (z) axis, near contact."""
    twin = PartSpec(original.kind, original.rotation.copy(), original.translation.copy(),
                    original.scale.copy(), part_id)
    placed_field = UnionField([p.field() for p in placed])
    local_pts = _local_probe(twin)
    sign = 1.0 if rng.uniform() < 0.5 else -1.0
    direction = np.array([0.0, 0.0, sign])
    r_sum = 2.0 * _bounding_radius(original) + 0.1
    target = rng.uniform(0.0, 0.015)
    lo_t, hi_t = 0.0, r_sum * 1.6
    if _gap(local_pts, twin.rotation, original.translation + hi_t * direction,
            placed_field) < target:
        return None
    for _ in range(48):
        mid = 0.5 * (lo_t + hi_t)
        g = _gap(local_pts, twin.rotation, original.translation + mid * direction,
                 placed_field)
        if g < target:
            lo_t = mid
        else:
            hi_t = mid
    twin.translation = original.translation + hi_t * direction
    return twin


def _normalize(parts: list[PartSpec]) -> None:
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for p in parts:
        plo, phi = primitive_aabb(p.kind, p.rotation, p.translation, p.scale)
        lo = np.minimum(lo, plo)
        hi = np.maximum(hi, phi)
    center = 0.5 * (lo + hi)
    extent = float(np.max(hi - center))
    s = NORMALIZED_HALF_EXTENT / extent
    for p in parts:
        p.translation = (p.translation - center) * s
        p.scale = p.scale * s


def _occupancy_counts(parts: list[PartSpec], resolution: int = 32) -> np.ndarray:
    centers = voxel_centers(resolution)
    inside = np.stack([p.field().evaluate(centers) <= 0.0 for p in parts])
    return inside


def canonical_order(parts: list[PartSpec]) -> list[PartSpec]:
    """Descending 32^3 occupancy, centroid (x, y, z) ties, then part id."""
    inside = _occupancy_counts(parts)
    counts = inside.sum(axis=1)
    keys = [(-counts[i], parts[i].translation[0], parts[i].translation[1],
             parts[i].translation[2], parts[i].part_id) for i in range(len(parts))]
    order = sorted(range(len(parts)), key=lambda i: keys[i])
    return [parts[i] for i in order]


def generate_scene(seed: int, difficulty: str, asset_id: str = "") -> SceneSpec:
    """Deterministic scene for (seed, difficulty)."""
    if difficulty not in PROFILES:
        raise ValueError(f"unknown difficulty {difficulty!r}; choose from {sorted(PROFILES)}")
    for attempt in range(100):
        scene = _try_generate(child_seed(seed, "scene", attempt), seed, difficulty, asset_id)
        if scene is not None:
            return scene
    raise RuntimeError(f"scene generation failed for seed={seed} difficulty={difficulty}")


def _try_generate(gen_seed: int, seed: int, difficulty: str, asset_id: str) -> SceneSpec | None:
    rng = make_rng(gen_seed, "parts")
    klo, khi = PROFILES[difficulty]
    k = int(rng.integers(klo, khi + 1))
    size_factor = float(np.clip((4.0 / (3.0 + k)) ** (1.0 / 3.0), 0.75, 1.1))

    twin_at = -1
    if difficulty in ("standard", "hard") and k >= 2 and rng.uniform() < TWIN_PROB:
        twin_at = int(rng.integers(1, k))

    parts: list[PartSpec] = []
    for i in range(k):
        if i == twin_at:
            src = parts[int(rng.integers(len(parts)))]
            twin = _place_twin(src, parts, rng, part_id=i)
            if twin is None:
                return None
            parts.append(twin)
            continue
        part = _random_part(rng, i, size_factor)
        if not parts:
            parts.append(part)
            continue
        if not _place_part(part, parts, rng):
            return None
        parts.append(part)

    _normalize(parts)
    for p in parts:
        if p.volume() < MIN_PART_VOLUME:
            return None
        plo, phi = primitive_aabb(p.kind, p.rotation, p.translation, p.scale)
        if np.any(plo < -0.9) or np.any(phi > 0.9):
            return None

    inside = _occupancy_counts(parts)
    overlap_frac = float((inside.sum(axis=0) >= 2).mean())
    scene = SceneSpec(asset_id, seed, difficulty, canonical_order(parts),
                      overlap_volume=overlap_frac * 8.0)
    return scene
