"""AdamW with bias correction and decoupled weight decay."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class AdamW:
    def __init__(self, named_params, lr: float = 1e-4, betas=(0.9, 0.999),
                 weight_decay: float = 0.01, eps: float = 1e-8):
        self.named_params: list[tuple[str, Tensor]] = list(named_params)
        self.lr = float(lr)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.weight_decay = float(weight_decay)
        self.eps = float(eps)
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.named_params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.named_params}

    def step(self, lr: float | None = None):
        """One update from the gradients currently held by the parameters."""
        lr = self.lr if lr is None else float(lr)
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in self.named_params:
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            if self.weight_decay:
                p.data *= np.float32(1.0 - lr * self.weight_decay)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data -= np.float32(lr) * update

    def zero_grad(self):
        for _, p in self.named_params:
            p.grad = None

    def state_dict(self) -> dict:
        out = {"step": self.step_count}
        for name in self.m:
            out[f"m.{name}"] = self.m[name].copy()
            out[f"v.{name}"] = self.v[name].copy()
        return out

    def load_state_dict(self, state: dict):
        self.step_count = int(state["step"])
        for name in self.m:
            self.m[name] = np.asarray(state[f"m.{name}"], dtype=np.float32).copy()
            self.v[name] = np.asarray(state[f"v.{name}"], dtype=np.float32).copy()
