"""Sphere-traced orthographic silhouettes with depth-cue shading.

The default camera is `front`: rays start outside the volume on +z and march
along -z. Hit pixels get 0.5 + 0.5 * (normal . light) shading so images carry
depth cues; background is 0. Per-part renders are amodal by default (the part
is rendered alone), with an occluded variant that keeps only pixels where the
part is the nearest surface of the whole scene.
"""

from __future__ import annotations

import numpy as np

from ..geometry import SdfField, sdf_normals

IMAGE_SIZE = 128
MAX_STEPS = 256
SURFACE_TOL = 1e-3
_LIGHT = np.array([0.4, 0.6, 0.8]) / np.linalg.norm([0.4, 0.6, 0.8])

CAMERAS = {
    # tag -> (ray direction, right axis, up axis); origin plane offset 1.5
    "front": (np.array([0.0, 0.0, -1.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
    "back": (np.array([0.0, 0.0, 1.0]), np.array([-1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
    "right": (np.array([-1.0, 0.0, 0.0]), np.array([0.0, 0.0, -1.0]), np.array([0.0, 1.0, 0.0])),
    "left": (np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0])),
}


def camera_rays(camera: str, size: int = IMAGE_SIZE):
    """Ray origins (size*size, 3) and the shared direction for a camera tag."""
    if camera not in CAMERAS:
        raise ValueError(f"unknown camera {camera!r}; choose from {sorted(CAMERAS)}")
    direction, right, up = CAMERAS[camera]
    u = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    uu, vv = np.meshgrid(u, -u)  # row 0 is the top of the image
    origins = (uu.reshape(-1, 1) * right + vv.reshape(-1, 1) * up - 1.5 * direction)
    return origins, direction


def trace(fld: SdfField, origins: np.ndarray, direction: np.ndarray,
          max_dist: float = 3.2) -> tuple[np.ndarray, np.ndarray]:
    """Sphere trace; returns (hit mask, travel distance) per ray."""
    n = len(origins)
    t = np.zeros(n)
    hit = np.zeros(n, dtype=bool)
    active = np.arange(n)
    for _ in range(MAX_STEPS):
        pts = origins[active] + t[active, None] * direction
        d = fld.evaluate(pts)
        newly = d < SURFACE_TOL
        hit[active[newly]] = True
        t[active] += np.maximum(d, 0.0)
        active = active[~newly & (t[active] <= max_dist)]
        if active.size == 0:
            break
    return hit, t


def render_field(fld: SdfField, camera: str = "front", size: int = IMAGE_SIZE) -> np.ndarray:
    """Shaded coverage image in [0, 1], shape (size, size)."""
    origins, direction = camera_rays(camera, size)
    hit, t = trace(fld, origins, direction)
    img = np.zeros(len(origins))
    if hit.any():
        pts = origins[hit] + t[hit, None] * direction
        normals = sdf_normals(fld, pts, h=1e-3)
        img[hit] = np.clip(0.5 + 0.5 * normals @ _LIGHT, 0.0, 1.0)
    return img.reshape(size, size)


def render_scene(scene, camera: str = "front", part_index: int | None = None,
                 size: int = IMAGE_SIZE, occluded: bool = False) -> np.ndarray:
    """Whole-scene render, or a per-part render when part_index is given.

    part_index refers to the canonical part order (0-based). The amodal
    default renders the part alone; occluded=True masks it by visibility in
    the whole scene.
    """
    if part_index is None:
        return render_field(scene.whole_field(), camera, size)
    if not 0 <= part_index < scene.num_parts:
        raise ValueError(f"unknown part index {part_index} for {scene.num_parts} parts")
    part_img = render_field(scene.parts[part_index].field(), camera, size)
    if not occluded:
        return part_img
    origins, direction = camera_rays(camera, size)
    hit_w, t_w = trace(scene.whole_field(), origins, direction)
    hit_p, t_p = trace(scene.parts[part_index].field(), origins, direction)
    visible = hit_w & hit_p & (np.abs(t_w - t_p) < 2e-3)
    return np.where(visible.reshape(size, size), part_img, 0.0)


def save_pgm(img: np.ndarray, path) -> None:
    """Binary PGM (P5, maxval 255)."""
    h, w = img.shape
    data = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def load_pgm(path) -> np.ndarray:
    """Read a binary PGM back to floats in [0, 1]."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
        line = fh.readline()
        while line.startswith(b"#"):
            line = fh.readline()
        w, h = (int(x) for x in line.split())
        maxval = int(fh.readline())
        data = np.frombuffer(fh.read(w * h), dtype=np.uint8)
        if data.size != w * h:
            raise ValueError(f"{path}: truncated pixel data ({data.size} of {w * h} bytes)")
    return data.reshape(h, w).astype(np.float64) / maxval
