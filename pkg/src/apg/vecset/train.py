"""VAE training: truncated-SDF regression plus normal, Eikonal and KL terms.

Each step draws a batch of shapes (whole objects and individual parts are
both items), subsamples their stored supervision points, and minimizes

    L1 + MSE on truncated SDF
    + 10    * (1 - cos(decoder spatial gradient, surface normal))
    + 0.1   * (|gradient| - 1)^2 at near-surface points
    + 0.001 * KL(q(z|x) || N(0, I))
    + empty_weight * (L1 + MSE toward +truncation) on jittered zero latents

The last term pins the all-zeros token set to the empty shape, which is what
makes the end-of-parts latent decodable. All per-step randomness is keyed by
(seed, step), so resumed runs are bitwise identical to uninterrupted ones.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import tensor as T
from ..errors import NumericAbort
from ..optim import AdamW
from ..rng import make_rng
from ..tensor import Tape, Tensor
from .model import ShapeVae, VaeConfig


@dataclass
class VaeTrainSettings:
    steps: int = 20000
    batch_size: int = 8
    lr: float = 1e-4
    warmup_start_lr: float = 1e-5
    warmup_steps: int = 500
    weight_decay: float = 0.01
    sdf_points: int = 768          # per item per step, split across the three sections
    grad_surface_points: int = 128
    grad_near_points: int = 128
    empty_points: int = 256
    log_interval: int = 50
    checkpoint_interval: int = 5000
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "VaeTrainSettings":
        known = {f.name for f in dataclasses.fields(VaeTrainSettings)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown VaeTrainSettings keys: {sorted(unknown)}")
        return VaeTrainSettings(**d)


def vae_items_from_dataset(asset_dirs) -> list[dict]:
    """Flatten assets into shape items: every whole and every part."""
    from ..synthgen import read_asset
    items = []
    for adir in asset_dirs:
        asset = read_asset(adir, load_images=False)
        for _, samples in asset.bundle.sections():
            items.append({
                "surface_pos": samples.surface_pos.astype(np.float32),
                "surface_normal": samples.surface_normal.astype(np.float32),
                "near_pos": samples.near_pos.astype(np.float32),
                "near_sdf": samples.near_sdf.astype(np.float32),
                "vol_pos": samples.vol_pos.astype(np.float32),
                "vol_sdf": samples.vol_sdf.astype(np.float32),
            })
    return items


def _gather(items: list[dict], ids: np.ndarray, key: str, idx: np.ndarray) -> np.ndarray:
    return np.stack([items[i][key][idx[j]] for j, i in enumerate(ids)])


class VaeTrainer:
    def __init__(self, model: ShapeVae, items: list[dict], settings: VaeTrainSettings):
        if not items:
            raise ValueError("empty training set")
        self.model = model
        self.items = items
        self.s = settings
        self.opt = AdamW(model.named_parameters(), lr=settings.lr,
                         weight_decay=settings.weight_decay)

    @property
    def step(self) -> int:
        return self.opt.step_count

    def lr_at(self, step: int) -> float:
        s = self.s
        if step < s.warmup_steps:
            frac = step / max(s.warmup_steps, 1)
            return s.warmup_start_lr + (s.lr - s.warmup_start_lr) * frac
        return s.lr

    def train_step(self) -> dict:
        s = self.s
        model = self.model
        c = model.config
        step = self.opt.step_count
        rng = make_rng(s.seed, "vae-step", step)

        ids = rng.integers(len(self.items), size=s.batch_size)
        n_stored = self.items[0]["surface_pos"].shape[0]
        enc_idx = np.stack([rng.choice(n_stored, size=c.input_points, replace=False)
                            for _ in ids])
        enc_pos = _gather(self.items, ids, "surface_pos", enc_idx)
        enc_nrm = _gather(self.items, ids, "surface_normal", enc_idx)

        per = s.sdf_points // 3
        near_i = np.stack([rng.integers(n_stored, size=per) for _ in ids])
        vol_i = np.stack([rng.integers(n_stored, size=per) for _ in ids])
        surf_i = np.stack([rng.integers(n_stored, size=per) for _ in ids])
        sdf_q = np.concatenate([
            _gather(self.items, ids, "near_pos", near_i),
            _gather(self.items, ids, "vol_pos", vol_i),
            _gather(self.items, ids, "surface_pos", surf_i)], axis=1)
        sdf_t = np.concatenate([
            _gather(self.items, ids, "near_sdf", near_i),
            _gather(self.items, ids, "vol_sdf", vol_i),
            np.zeros((len(ids), per), dtype=np.float32)], axis=1)

        gs_i = np.stack([rng.integers(n_stored, size=s.grad_surface_points) for _ in ids])
        gn_i = np.stack([rng.integers(n_stored, size=s.grad_near_points) for _ in ids])
        g_q = np.concatenate([_gather(self.items, ids, "surface_pos", gs_i),
                              _gather(self.items, ids, "near_pos", gn_i)], axis=1)
        g_n = _gather(self.items, ids, "surface_normal", gs_i)

        jitter = rng.uniform(0.0, 0.05)
        z_empty = (rng.standard_normal((1, c.latent_tokens, c.latent_dim)) * jitter)
        empty_q = rng.uniform(-1.0, 1.0, size=(1, s.empty_points, 3)).astype(np.float32)

        with Tape() as tape:
            z, mu, logvar = model.encode_batch(enc_pos, enc_nrm, "stochastic",
                                               seed=make_rng(s.seed, "eps", step).integers(2 ** 62))
            kv = model.process_tokens(z)

            pred = model.decode_batch(None, sdf_q, kv=kv)
            diff = T.sub(pred, Tensor(sdf_t))
            sdf_loss = T.add(T.tmean(T.tabs(diff)), T.tmean(T.square(diff)))

            _, grad = model.decode_batch(None, g_q, with_gradient=True, kv=kv)
            g_surf = T.slice_axis(grad, 1, 0, s.grad_surface_points)
            g_near = T.slice_axis(grad, 1, s.grad_surface_points,
                                  s.grad_surface_points + s.grad_near_points)
            gnorm_s = T.tsqrt(T.add(T.tsum(T.square(g_surf), axis=-1), 1e-12))
            cos = T.div(T.tsum(T.mul(g_surf, Tensor(g_n)), axis=-1), gnorm_s)
            normal_loss = T.tmean(T.sub(1.0, cos))
            gnorm_n = T.tsqrt(T.add(T.tsum(T.square(g_near), axis=-1), 1e-12))
            eikonal_loss = T.tmean(T.square(T.sub(gnorm_n, 1.0)))

            kl = T.mul(T.tmean(T.sub(T.add(T.square(mu), T.texp(logvar)),
                                     T.add(logvar, 1.0))), 0.5)

            kv_e = model.process_tokens(Tensor(z_empty.astype(np.float32)))
            pred_e = model.decode_batch(None, empty_q, kv=kv_e)
            diff_e = T.sub(pred_e, c.truncation)
            empty_loss = T.add(T.tmean(T.tabs(diff_e)), T.tmean(T.square(diff_e)))

            total = sdf_loss
            total = T.add(total, T.mul(normal_loss, c.normal_weight))
            total = T.add(total, T.mul(eikonal_loss, c.eikonal_weight))
            total = T.add(total, T.mul(kl, c.kl_weight))
            total = T.add(total, T.mul(empty_loss, c.empty_weight))
            if not np.isfinite(total.data):
                raise NumericAbort(f"non-finite VAE loss at step {step}")
            tape.backward(total)

        self.opt.step(lr=self.lr_at(step))
        self.opt.zero_grad()
        return {"total": float(total.data), "sdf": float(sdf_loss.data),
                "normal": float(normal_loss.data), "eikonal": float(eikonal_loss.data),
                "kl": float(kl.data), "empty": float(empty_loss.data),
                "lr": self.lr_at(step)}


_CSV_FIELDS = ("step", "total", "sdf", "normal", "eikonal", "kl", "empty", "lr")


def train_vae(model: ShapeVae, items: list[dict], settings: VaeTrainSettings,
              out_dir, resume_opt: dict | None = None, log_fn=None) -> Path:
    """Run (or resume) training; returns the final checkpoint path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trainer = VaeTrainer(model, items, settings)
    if resume_opt:
        trainer.opt.load_state_dict(resume_opt)

    log_path = out_dir / "vae_loss.csv"
    new_log = not log_path.exists() or not resume_opt
    mode = "w" if new_log else "a"
    final_path = out_dir / "vae_final.ckpt"

    def save(path):
        model.save(path, step=trainer.step, seed=settings.seed,
                   extra={"train_settings": settings.to_dict()},
                   opt_state=trainer.opt.state_dict())

    with open(log_path, mode, newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        if new_log:
            writer.writeheader()
        while trainer.step < settings.steps:
            try:
                stats = trainer.train_step()
            except NumericAbort:
                save(out_dir / "vae_abort.ckpt")
                raise
            step = trainer.step
            if step % settings.log_interval == 0 or step == settings.steps:
                writer.writerow({"step": step, **{k: f"{v:.6g}" for k, v in stats.items()}})
                fh.flush()
                if log_fn:
                    log_fn(step, stats)
            if step % settings.checkpoint_interval == 0 and step < settings.steps:
                save(out_dir / f"vae_{step:07d}.ckpt")
    save(final_path)
    return final_path
