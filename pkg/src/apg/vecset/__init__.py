"""Set-latent shape VAE: encoding, SDF decoding, concatenation, fusion."""

from .fuse import FUSE_RESOLUTION, fuse, part_mesh
from .latent import LatentSet, concat
from .model import ShapeVae, VaeConfig, furthest_point_indices
from .train import VaeTrainSettings, VaeTrainer, train_vae, vae_items_from_dataset

__all__ = [
    "FUSE_RESOLUTION", "fuse", "part_mesh", "LatentSet", "concat", "ShapeVae",
    "VaeConfig", "furthest_point_indices", "VaeTrainSettings", "VaeTrainer",
    "train_vae", "vae_items_from_dataset",
]
