"""The set-latent shape VAE.

Encoder: furthest-point-sampled anchor points cross-attend to all input
points (Fourier position features concatenated with normals), then a stack
of self-attention blocks; mean/log-variance heads emit M tokens of width D.

Decoder: the tokens run through a self-attention processor once per latent;
each query point is Fourier-embedded and cross-attends to the processed
tokens through a single residual block, ending in a tanh-truncated SDF head.
Query-gradient evaluation propagates three forward-mode tangent streams
through the same graph, so gradient-based losses stay exactly differentiable
with respect to the parameters.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..checkpoint import load_checkpoint, save_checkpoint
from ..geometry import FuncField
from ..nn import (AttentionBlock, FourierFeatures, Linear, Module, LayerNorm,
                  init_rng)
from ..rng import make_rng
from ..tensor import Tensor
from .latent import LatentSet


@dataclass
class VaeConfig:
    latent_tokens: int = 64        # M
    latent_dim: int = 128          # D
    encoder_layers: int = 4        # self-attention blocks after the input cross-attention
    decoder_layers: int = 6        # token-processor self-attention blocks
    width: int = 256
    heads: int = 4
    mlp_ratio: int = 4
    input_points: int = 2048       # N
    fourier_octaves: int = 8
    kl_weight: float = 1e-3
    normal_weight: float = 10.0
    eikonal_weight: float = 0.1
    truncation: float = 0.25
    empty_weight: float = 1.0      # zero-latent -> empty-shape supervision

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "VaeConfig":
        known = {f.name for f in dataclasses.fields(VaeConfig)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown VaeConfig keys: {sorted(unknown)}")
        return VaeConfig(**d)


def furthest_point_indices(points: np.ndarray, count: int) -> np.ndarray:
    """Deterministic FPS: start at the point farthest from the centroid
    (lowest index on ties), then greedily maximize the min distance."""
    n = len(points)
    if count > n:
        raise ValueError(f"cannot pick {count} anchors from {n} points")
    centroid = points.mean(axis=0)
    start = int(np.argmax(((points - centroid) ** 2).sum(axis=1)))
    idx = np.empty(count, dtype=np.int64)
    idx[0] = start
    dist = ((points - points[start]) ** 2).sum(axis=1)
    for i in range(1, count):
        nxt = int(np.argmax(dist))
        idx[i] = nxt
        np.minimum(dist, ((points - points[nxt]) ** 2).sum(axis=1), out=dist)
    return idx


class ShapeVae(Module):
    def __init__(self, config: VaeConfig, seed: int = 0):
        c = config
        self.config = c
        self.fourier = FourierFeatures(c.fourier_octaves)
        feat_dim = self.fourier.out_dim(3)
        rng = init_rng(seed, "vae")

        # encoder
        self.enc_in = Linear(rng, feat_dim + 3, c.width)
        self.enc_cross = AttentionBlock(rng, c.width, c.heads, c.mlp_ratio)
        self.enc_blocks = [AttentionBlock(rng, c.width, c.heads, c.mlp_ratio)
                           for _ in range(c.encoder_layers)]
        self.enc_ln = LayerNorm(c.width)
        self.enc_mu = Linear(rng, c.width, c.latent_dim)
        self.enc_logvar = Linear(rng, c.width, c.latent_dim, zero_init=True)

        # decoder
        self.dec_in = Linear(rng, c.latent_dim, c.width)
        self.dec_blocks = [AttentionBlock(rng, c.width, c.heads, c.mlp_ratio)
                           for _ in range(c.decoder_layers)]
        self.dec_kv_ln = LayerNorm(c.width)
        self.query_in = Linear(rng, feat_dim, c.width)
        self.q_ln1 = LayerNorm(c.width)
        self.q_attn_q = Linear(rng, c.width, c.width)
        self.q_attn_k = Linear(rng, c.width, c.width)
        self.q_attn_v = Linear(rng, c.width, c.width)
        self.q_attn_o = Linear(rng, c.width, c.width)
        self.q_ln2 = LayerNorm(c.width)
        self.q_fc1 = Linear(rng, c.width, c.width * c.mlp_ratio)
        self.q_fc2 = Linear(rng, c.width * c.mlp_ratio, c.width)
        self.head_ln = LayerNorm(c.width)
        self.head = Linear(rng, c.width, 1, std=1e-2)

    # ------------------------------------------------------------------
    # encoding
    # ------------------------------------------------------------------

    def _featurize(self, positions: Tensor, normals: Tensor) -> Tensor:
        return self.enc_in(T.concat([self.fourier(positions), normals], axis=-1))

    def encode_batch(self, positions: np.ndarray, normals: np.ndarray,
                     mode: str = "deterministic", seed: int = 0):
        """Encode (B, N, 3) points+normals; returns (z, mu, logvar) tensors."""
        if positions.ndim != 3:
            raise ValueError(f"expected (B, N, 3) points, got {positions.shape}")
        if not (np.isfinite(positions).all() and np.isfinite(normals).all()):
            raise ValueError("non-finite encoder inputs")
        b, n, _ = positions.shape
        m = self.config.latent_tokens
        anchor_idx = np.stack([furthest_point_indices(positions[i], m) for i in range(b)])
        anchors_p = np.take_along_axis(positions, anchor_idx[:, :, None], axis=1)
        anchors_n = np.take_along_axis(normals, anchor_idx[:, :, None], axis=1)

        inp = self._featurize(Tensor(positions), Tensor(normals))
        query = self._featurize(Tensor(anchors_p), Tensor(anchors_n))
        h = self.enc_cross(query, inp)
        for blk in self.enc_blocks:
            h = blk(h)
        h = self.enc_ln(h)
        mu = self.enc_mu(h)
        logvar = self.enc_logvar(h)
        if mode == "deterministic":
            return mu, mu, logvar
        if mode != "stochastic":
            raise ValueError(f"unknown encode mode {mode!r}")
        eps = make_rng(seed, "encode-eps").standard_normal(mu.shape).astype(np.float32)
        z = T.add(mu, T.mul(T.texp(T.mul(logvar, 0.5)), Tensor(eps)))
        return z, mu, logvar

    def encode(self, positions: np.ndarray, normals: np.ndarray,
               mode: str = "deterministic", seed: int = 0) -> LatentSet:
        """Encode one point set (N, 3) to a LatentSet (no tape required)."""
        z, _, _ = self.encode_batch(positions[None], normals[None], mode, seed)
        return LatentSet(z.data[0].copy(), provenance="encoded")

    # ------------------------------------------------------------------
    # decoding
    # ------------------------------------------------------------------

    def process_tokens(self, tokens: Tensor) -> Tensor:
        """Run the self-attention processor; (B, M, D) -> (B, M, W)."""
        h = self.dec_in(tokens)
        for blk in self.dec_blocks:
            h = blk(h)
        return self.dec_kv_ln(h)

    def _attend(self, q: Tensor, k: Tensor, v: Tensor, batch: int, s: int) -> Tensor:
        c = self.config
        dh = c.width // c.heads
        qh = T.transpose(T.reshape(q, (batch, s, c.heads, dh)), (0, 2, 1, 3))
        out = T.matmul(T.softmax(T.mul(T.matmul(qh, k), 1.0 / np.sqrt(dh)), axis=-1), v)
        return T.reshape(T.transpose(out, (0, 2, 1, 3)), (batch, s, c.width))

    def decode_batch(self, tokens: Tensor | None, queries: np.ndarray,
                     with_gradient: bool = False, kv: Tensor | None = None):
        """Decode (B, S, 3) queries against (B, M, D) tokens.

        Returns sdf (B, S) or (sdf, grad (B, S, 3)) when with_gradient is
        set; the gradient is the exact spatial derivative propagated as
        forward-mode tangents, itself differentiable w.r.t. parameters.
        Pass kv=process_tokens(tokens) to amortize the processor over calls.
        """
        c = self.config
        q_arr = queries.data if isinstance(queries, Tensor) else queries
        if not np.isfinite(q_arr).all():
            raise ValueError("non-finite decode queries")
        b, s, _ = q_arr.shape
        dh = c.width // c.heads
        if kv is None:
            kv = self.process_tokens(tokens)
        k_all = self.q_attn_k(kv)
        v_all = self.q_attn_v(kv)
        m = kv.shape[1]
        kh = T.transpose(T.reshape(k_all, (b, m, c.heads, dh)), (0, 2, 3, 1))  # (B,H,Dh,M)
        vh = T.transpose(T.reshape(v_all, (b, m, c.heads, dh)), (0, 2, 1, 3))  # (B,H,M,Dh)

        p = queries if isinstance(queries, Tensor) else Tensor(queries.astype(np.float32))
        e = self.fourier(p)
        h = self.query_in(e)

        # cross-attention block (primal)
        u_hat1, c1, sig1 = T.layer_norm_stats(h)
        u1 = T.add(T.mul(u_hat1, self.q_ln1.g), self.q_ln1.b)
        q = self.q_attn_q(u1)
        qh = T.transpose(T.reshape(q, (b, s, c.heads, dh)), (0, 2, 1, 3))
        logits = T.mul(T.matmul(qh, kh), 1.0 / np.sqrt(dh))
        attn = T.softmax(logits, axis=-1)
        o = T.matmul(attn, vh)
        o = T.reshape(T.transpose(o, (0, 2, 1, 3)), (b, s, c.width))
        h1 = T.add(h, self.q_attn_o(o))

        u_hat2, c2, sig2 = T.layer_norm_stats(h1)
        u2 = T.add(T.mul(u_hat2, self.q_ln2.g), self.q_ln2.b)
        f1 = self.q_fc1(u2)
        g1 = T.gelu(f1)
        h2 = T.add(h1, self.q_fc2(g1))

        u_hat3, c3, sig3 = T.layer_norm_stats(h2)
        u3 = T.add(T.mul(u_hat3, self.head_ln.g), self.head_ln.b)
        y = self.head(u3)
        tau = c.truncation
        th = T.ttanh(T.mul(y, 1.0 / tau))
        sdf = T.reshape(T.mul(th, tau), (b, s))
        if not with_gradient:
            return sdf

        # tangent streams for the three axes
        gelu_d = T.gelu_grad(f1)
        one_minus_th2 = T.sub(1.0, T.mul(th, th))
        grads = []
        for axis in range(3):
            dp = np.zeros((1, 1, 3), dtype=np.float32)
            dp[..., axis] = 1.0
            t_e = self.fourier.tangent(p, Tensor(np.broadcast_to(dp, q_arr.shape).copy()))
            t_h = T.matmul(t_e, self.query_in.w)
            t_u1 = T.mul(self._ln_tangent(t_h, u_hat1, sig1), self.q_ln1.g)
            t_q = T.matmul(t_u1, self.q_attn_q.w)
            t_qh = T.transpose(T.reshape(t_q, (b, s, c.heads, dh)), (0, 2, 1, 3))
            t_logits = T.mul(T.matmul(t_qh, kh), 1.0 / np.sqrt(dh))
            t_attn = T.mul(attn, T.sub(t_logits, T.tsum(T.mul(attn, t_logits), axis=-1, keepdims=True)))
            t_o = T.matmul(t_attn, vh)
            t_o = T.reshape(T.transpose(t_o, (0, 2, 1, 3)), (b, s, c.width))
            t_h1 = T.add(t_h, T.matmul(t_o, self.q_attn_o.w))
            t_u2 = T.mul(self._ln_tangent(t_h1, u_hat2, sig2), self.q_ln2.g)
            t_f1 = T.matmul(t_u2, self.q_fc1.w)
            t_g1 = T.mul(gelu_d, t_f1)
            t_h2 = T.add(t_h1, T.matmul(t_g1, self.q_fc2.w))
            t_u3 = T.mul(self._ln_tangent(t_h2, u_hat3, sig3), self.head_ln.g)
            t_y = T.matmul(t_u3, self.head.w)
            t_sdf = T.mul(one_minus_th2, t_y)  # d tanh(y/tau)*tau = (1-th^2) dy
            grads.append(T.reshape(t_sdf, (b, s, 1)))
        grad = T.concat(grads, axis=-1)
        return sdf, grad

    @staticmethod
    def _ln_tangent(t_x: Tensor, u_hat: Tensor, sigma: Tensor) -> Tensor:
        """Tangent of layer normalization given primal (u_hat, sigma)."""
        t_mu = T.tmean(t_x, axis=-1, keepdims=True)
        t_c = T.sub(t_x, t_mu)
        proj = T.tmean(T.mul(u_hat, t_c), axis=-1, keepdims=True)
        # mean(u_hat * t_c) equals t_sigma/... : d u_hat = (t_c - u_hat*mean(u_hat*t_c)) / sigma
        return T.div(T.sub(t_c, T.mul(u_hat, proj)), sigma)

    def decode_sdf(self, z: LatentSet, queries: np.ndarray, chunk: int = 32768) -> np.ndarray:
        """Decode signed distances for (S, 3) numpy queries (inference path).

        The empty latent decodes to +truncation everywhere by convention.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        if z.num_tokens == 0:
            return np.full(len(queries), self.config.truncation)
        out = np.empty(len(queries))
        kv = self.process_tokens(Tensor(z.tokens[None]))
        for i in range(0, len(queries), chunk):
            q = queries[i:i + chunk].astype(np.float32)[None]
            sdf = self.decode_batch(None, q, kv=kv)
            out[i:i + chunk] = sdf.data[0].astype(np.float64)
        return out

    def latent_field(self, z: LatentSet) -> FuncField:
        return FuncField(lambda pts: self.decode_sdf(z, pts), provenance="decoded-latent")

    # ------------------------------------------------------------------
    # persistence
    # ------------------------------------------------------------------

    def save(self, path, step: int = 0, seed: int = 0, extra: dict | None = None,
             opt_state: dict | None = None) -> None:
        payload = {"kind": "vae", "config": self.config.to_dict(),
                   "step": step, "seed": seed, "extra": extra or {}}
        tensors = self.state_dict()
        if opt_state:
            payload["opt_step"] = opt_state["step"]
            for key, arr in opt_state.items():
                if key != "step":
                    tensors[f"opt.{key}"] = arr
        save_checkpoint(path, payload, tensors)

    @staticmethod
    def load(path) -> tuple["ShapeVae", dict, dict]:
        """Returns (model, payload, optimizer tensors)."""
        payload, tensors = load_checkpoint(path)
        if payload.get("kind") != "vae":
            raise ValueError(f"{path}: not a VAE checkpoint (kind={payload.get('kind')!r})")
        config = VaeConfig.from_dict(payload["config"])
        model = ShapeVae(config, seed=payload.get("seed", 0))
        params = {k: v for k, v in tensors.items() if not k.startswith("opt.")}
        opt = {k[4:]: v for k, v in tensors.items() if k.startswith("opt.")}
        if "opt_step" in payload:
            opt["step"] = payload["opt_step"]
        model.load_state_dict(params)
        return model, payload, opt
