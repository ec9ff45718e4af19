"""Procedural compositional assets: scenes, silhouettes, supervision bundles."""

from .bundle import (BUNDLE_MAGIC, POINTS_PER_SECTION, TRUNCATION, SampleBundle,
                     ShapeSamples, build_bundle, load_bundle, save_bundle,
                     truncate)
from .dataset import (Asset, dataset_asset_dirs, read_asset,
                      synthesize_dataset, write_asset)
from .render import (CAMERAS, IMAGE_SIZE, camera_rays, load_pgm, render_field,
                     render_scene, save_pgm, trace)
from .scene import (MIN_PART_VOLUME, PROFILES, PartSpec, SceneSpec,
                    canonical_order, generate_scene)

__all__ = [
    "BUNDLE_MAGIC", "POINTS_PER_SECTION", "TRUNCATION", "SampleBundle",
    "ShapeSamples", "build_bundle", "load_bundle", "save_bundle", "truncate",
    "Asset", "dataset_asset_dirs", "read_asset", "synthesize_dataset",
    "write_asset", "CAMERAS", "IMAGE_SIZE", "camera_rays", "load_pgm",
    "render_field", "render_scene", "save_pgm", "trace", "MIN_PART_VOLUME",
    "PROFILES", "PartSpec", "SceneSpec", "canonical_order", "generate_scene",
]
