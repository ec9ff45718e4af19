"""Set latents: M tokens of width D whose order carries no meaning."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class LatentSet:
    tokens: np.ndarray  # (M, D) float32
    provenance: str = "encoded"

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.float32)
        if self.tokens.ndim != 2:
            raise ValueError(f"latent tokens must be (M, D), got {self.tokens.shape}")

    @property
    def num_tokens(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]

    def is_empty(self) -> bool:
        """True for the zero-token latent and for all-zero tokens (the
        canonical empty latent used as the end-of-parts target)."""
        return self.num_tokens == 0 or not self.tokens.any()

    def copy(self) -> "LatentSet":
        return LatentSet(self.tokens.copy(), self.provenance)

    @staticmethod
    def empty(dim: int) -> "LatentSet":
        return LatentSet(np.zeros((0, dim), dtype=np.float32), "empty")

    @staticmethod
    def zeros(num_tokens: int, dim: int, provenance: str = "empty") -> "LatentSet":
        return LatentSet(np.zeros((num_tokens, dim), dtype=np.float32), provenance)


def concat(a: LatentSet, b: LatentSet) -> LatentSet:
    """Token concatenation; decodes to (approximately) the shape union."""
    if a.num_tokens and b.num_tokens and a.dim != b.dim:
        raise ValueError(f"latent width mismatch: {a.dim} vs {b.dim}")
    if a.num_tokens == 0:
        return LatentSet(b.tokens.copy(), "concatenated")
    if b.num_tokens == 0:
        return LatentSet(a.tokens.copy(), "concatenated")
    return LatentSet(np.concatenate([a.tokens, b.tokens], axis=0), "concatenated")
