from __future__ import annotations

from typing import Iterable

import numpy as np

from .tensor import StateError, Tensor


class Optimizer:
    """Adam or plain SGD with decoupled weight decay.

    Weight decay shrinks parameters by ``lr * weight_decay`` before the
    gradient update (AdamW-style), for both kinds.
    """

    def __init__(
        self,
        params: Iterable[Tensor],
        kind: str = "adam",
        lr: float = 1e-3,
        weight_decay: float = 0.0,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        if kind not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer kind {kind!r}")
        if lr < 0:
            raise ValueError("learning rate must be non-negative")
        if weight_decay < 0:
            raise ValueError("weight decay must be non-negative")
        self.params = list(params)
        self.kind = kind
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        missing = [p.name or repr(p) for p in self.params if p.grad is None]
        if missing:
            raise StateError(f"no gradient for parameter(s): {', '.join(missing)}")
        self.t += 1
        b1, b2 = self.betas
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if self.weight_decay:
                p.data -= self.lr * self.weight_decay * p.data
            if self.kind == "sgd":
                p.data -= self.lr * g
                continue
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            # lr * mhat / (sqrt(vhat) + eps) with the bias corrections folded in
            denom = np.sqrt(v)
            denom /= np.sqrt(1 - b2**self.t)
            denom += self.eps
            step = m / denom
            step *= self.lr / (1 - b1**self.t)
            p.data -= step
        self.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {"t": np.array(self.t)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"m.{i}"] = m
            out[f"v.{i}"] = v
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        self.t = int(state["t"])
        for i in range(len(self.params)):
            self.m[i] = np.array(state[f"m.{i}"], dtype=np.float64)
            self.v[i] = np.array(state[f"v.{i}"], dtype=np.float64)


def glorot_init(shape: tuple[int, int], rng_seed=None, name: str | None = None) -> Tensor:
    """Glorot/Xavier uniform init; ``rng_seed`` may be an int or a Generator."""
    fan_in, fan_out = shape
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"dimensions must be positive, got {shape}")
    rng = np.random.default_rng(rng_seed)
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


def zeros(shape, name: str | None = None) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def ones(shape, name: str | None = None) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=True, name=name)
