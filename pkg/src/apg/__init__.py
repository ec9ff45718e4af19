"""Autoregressive compositional 3D part generation, desk scale.

A set-latent shape VAE with SDF decoding, a latent diffusion transformer
with dual classifier-free guidance, and an autoregressive loop that emits
one 3D part at a time — trained and verified on procedurally generated
primitive assemblies with exact geometric oracles.
"""

__version__ = "0.1.0"
