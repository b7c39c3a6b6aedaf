from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class AdamState:
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0


def adam_step(params: list[np.ndarray], grads: list[np.ndarray | None], state: AdamState, lr: float):
    """Bias-corrected Adam update, applied to ``params`` in place.

    A missing gradient counts as zero. Moments are created on the first call.
    """
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} params but {len(grads)} grads")
    for i, g in enumerate(grads):
        if g is not None and not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for parameter {i} at step {state.step + 1}")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype)
    return params


class Adam:
    def __init__(self, params: list[Tensor], beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(beta1, beta2, eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, lr: float):
        adam_step([p.data for p in self.params], [p.grad for p in self.params], self.state, lr)


@dataclass(frozen=True)
class LrSchedule:
    base_lr_g: float = 2e-4
    base_lr_d: float = 1e-4
    decay_start: float = 2e5
    decay_len: float = 2e5

    def __post_init__(self):
        if min(self.base_lr_g, self.base_lr_d, self.decay_start, self.decay_len) < 0:
            raise ValueError("learning-rate schedule values must be >= 0")

    def scaled(self, scale: float) -> "LrSchedule":
        return LrSchedule(self.base_lr_g, self.base_lr_d, self.decay_start / scale, self.decay_len / scale)


def lr_at(s: LrSchedule, iteration: int, which: str = "generator") -> float:
    """Constant learning rate, then a linear ramp to zero over ``decay_len`` iterations."""
    if which not in ("generator", "discriminator"):
        raise ValueError(f"which must be 'generator' or 'discriminator', got {which!r}")
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    base = s.base_lr_g if which == "generator" else s.base_lr_d
    if iteration < s.decay_start:
        return base
    if s.decay_len <= 0 or iteration >= s.decay_start + s.decay_len:
        return 0.0
    return base * (1.0 - (iteration - s.decay_start) / s.decay_len)
