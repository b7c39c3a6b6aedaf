"""Least-squares adversarial, cycle-consistency and identity-mapping losses.

All functions accept :class:`~dysvc.nn.Tensor` or plain arrays; results are
scalar tensors so they can be taped and differentiated.
"""
from __future__ import annotations

from typing import Callable

from ..nn import tensor as T
from ..nn.tensor import Tensor, as_tensor
from .config import GanConfig


def lsgan_discriminator(real_out, fake_out) -> Tensor:
    real_out, fake_out = as_tensor(real_out), as_tensor(fake_out)
    return T.add(T.mean(T.square(T.sub(real_out, 1.0))), T.mean(T.square(fake_out)))


def lsgan_generator(fake_out) -> Tensor:
    return T.mean(T.square(T.sub(as_tensor(fake_out), 1.0)))


def adversarial_loss(D: Callable, real_batch, fake_batch, side: str) -> Tensor:
    """Discriminator side: mean((D(real)-1)^2) + mean(D(fake)^2); generator side: mean((D(fake)-1)^2)."""
    if side == "discriminator":
        return lsgan_discriminator(D(as_tensor(real_batch)), D(as_tensor(fake_batch)))
    if side == "generator":
        return lsgan_generator(D(as_tensor(fake_batch)))
    raise ValueError(f"side must be 'generator' or 'discriminator', got {side!r}")


def cycle_loss(x, x_cyc, y, y_cyc, norm: str = "L1") -> Tensor:
    """Round-trip reconstruction error of both domains, mean absolute (L1) or mean squared (L2)."""
    if norm == "L1":
        dist = T.l1
    elif norm == "L2":
        dist = T.l2
    else:
        raise ValueError(f"norm must be 'L1' or 'L2', got {norm!r}")
    return T.add(dist(x_cyc, x), dist(y_cyc, y))


def identity_loss(x, f_x, y, g_y) -> Tensor:
    """mean|G(y) - y| + mean|F(x) - x|."""
    return T.add(T.l1(g_y, y), T.l1(f_x, x))


def second_adversarial_loss(d_prime: Callable | None, x, x_cyc, side: str, enabled: bool = True) -> Tensor:
    """Adversarial loss on cycled samples: ``x`` plays real, ``x_cyc`` plays fake."""
    if not enabled or d_prime is None:
        raise RuntimeError("second adversarial loss requested but two-step training is disabled")
    return adversarial_loss(d_prime, x, x_cyc, side)


def identity_active(cfg: GanConfig, iteration: int) -> bool:
    return iteration < cfg.scaled_id_zero_after


def total_loss(components: dict, cfg: GanConfig, iteration: int):
    """Complete generator objective.

    ``components`` holds ``gan_g`` and ``gan_f`` (the two adversarial terms),
    ``cycle``, ``identity`` and, for two-step training, ``gan2``. Missing
    entries count as zero.
    """
    total = components.get("gan_g", 0.0) + components.get("gan_f", 0.0)
    total = total + cfg.lambda_cycle * components.get("cycle", 0.0)
    if identity_active(cfg, iteration):
        total = total + cfg.lambda_id * components.get("identity", 0.0)
    if cfg.two_step:
        total = total + components.get("gan2", 0.0)
    return total
