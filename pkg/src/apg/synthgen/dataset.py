"""Dataset layout: one directory per asset.

    <root>/manifest.json            dataset manifest (asset ids, seeds, profile)
    <root>/<asset_id>/manifest.json SceneSpec, part order, camera, bundle table
    <root>/<asset_id>/bundle.bin    supervision points (APGBNDL1)
    <root>/<asset_id>/view_full.pgm whole-object silhouette
    <root>/<asset_id>/view_part_<k>.pgm  per-part silhouettes, k = 1..K
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..rng import child_seed
from .bundle import SampleBundle, build_bundle, load_bundle, save_bundle
from .render import load_pgm, render_scene, save_pgm
from .scene import SceneSpec, generate_scene

DEFAULT_CAMERA = "front"


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_asset(root: Path, scene: SceneSpec, camera: str = DEFAULT_CAMERA,
                occluded_masks: bool = False) -> Path:
    """Render, sample and store one asset; returns its directory."""
    asset_dir = Path(root) / scene.asset_id
    asset_dir.mkdir(parents=True, exist_ok=True)

    bundle = build_bundle(scene, scene.seed)
    table = save_bundle(bundle, asset_dir / "bundle.bin")

    save_pgm(render_scene(scene, camera), asset_dir / "view_full.pgm")
    for k in range(scene.num_parts):
        img = render_scene(scene, camera, part_index=k, occluded=occluded_masks)
        save_pgm(img, asset_dir / f"view_part_{k + 1}.pgm")

    manifest = scene.to_dict()
    manifest["camera"] = camera
    manifest["occluded_masks"] = occluded_masks
    manifest["bundle_sections"] = table
    _write_json(asset_dir / "manifest.json", manifest)
    return asset_dir


@dataclass
class Asset:
    scene: SceneSpec
    camera: str
    bundle: SampleBundle
    view_full: np.ndarray
    view_parts: list[np.ndarray]
    path: Path


def read_asset(asset_dir: Path, load_images: bool = True,
               load_points: bool = True) -> Asset:
    asset_dir = Path(asset_dir)
    manifest = json.loads((asset_dir / "manifest.json").read_text(encoding="utf-8"))
    scene = SceneSpec.from_dict(manifest)
    bundle = None
    if load_points:
        bundle = load_bundle(asset_dir / "bundle.bin", manifest["bundle_sections"])
    view_full = None
    view_parts = []
    if load_images:
        view_full = load_pgm(asset_dir / "view_full.pgm")
        view_parts = [load_pgm(asset_dir / f"view_part_{k + 1}.pgm")
                      for k in range(scene.num_parts)]
    return Asset(scene, manifest["camera"], bundle, view_full, view_parts, asset_dir)


def synthesize_dataset(root: Path, count: int, profile: str, seed: int,
                       camera: str = DEFAULT_CAMERA, occluded_masks: bool = False,
                       progress=None) -> dict:
    """Generate `count` assets; returns the dataset manifest."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        asset_seed = child_seed(seed, "asset", i)
        asset_id = f"asset_{i:05d}"
        scene = generate_scene(asset_seed, profile, asset_id)
        write_asset(root, scene, camera, occluded_masks)
        entries.append({"asset_id": asset_id, "seed": asset_seed,
                        "num_parts": scene.num_parts})
        if progress is not None:
            progress(i + 1, count)
    manifest = {"count": count, "profile": profile, "seed": seed,
                "camera": camera, "occluded_masks": occluded_masks,
                "assets": entries}
    _write_json(root / "manifest.json", manifest)
    return manifest


def dataset_asset_dirs(root: Path) -> list[Path]:
    root = Path(root)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    return [root / e["asset_id"] for e in manifest["assets"]]
