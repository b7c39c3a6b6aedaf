from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor


def numerical_grads(f: Callable[[], float], arrays: Sequence[np.ndarray], h: float = 1e-4) -> list[np.ndarray]:
    """Central differences of the scalar ``f()`` w.r.t. each array, perturbed in place."""
    out = []
    for arr in arrays:
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            plus = f()
            flat[k] = orig - h
            minus = f()
            flat[k] = orig
            gflat[k] = (plus - minus) / (2.0 * h)
        out.append(g)
    return out


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> float:
    """``||a - b|| / max(||a|| + ||b||, floor)``."""
    denom = max(np.linalg.norm(a) + np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / denom)


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-4,
    n_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Relative error between taped and finite-difference gradients of ``loss_fn``.

    Measured on the concatenation of all parameter gradients, so a parameter
    whose true gradient is exactly zero (a bias followed by a normalisation)
    does not turn finite-difference round-off into a 100% error. With
    ``n_coords`` only that many randomly chosen coordinates are perturbed.
    ``params`` should hold float64 data; ``loss_fn`` must rebuild the graph on each call.
    """
    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    analytic = np.concatenate([(np.zeros_like(p.data) if p.grad is None else p.grad).reshape(-1) for p in params])

    flats = [p.data.reshape(-1) for p in params]
    if any(not np.shares_memory(f, p.data) for f, p in zip(flats, params)):
        raise ValueError("check_gradients needs contiguous parameter arrays")
    owner = np.concatenate([np.full(f.size, k) for k, f in enumerate(flats)])
    local = np.concatenate([np.arange(f.size) for f in flats])
    coords = np.arange(owner.size)
    if n_coords is not None and n_coords < owner.size:
        coords = np.sort((rng or np.random.default_rng(0)).choice(owner.size, n_coords, replace=False))
    numeric = np.empty(coords.size)
    for out, c in enumerate(coords):
        flat, k = flats[owner[c]], local[c]
        orig = flat[k]
        flat[k] = orig + h
        plus = float(loss_fn().data)
        flat[k] = orig - h
        minus = float(loss_fn().data)
        flat[k] = orig
        numeric[out] = (plus - minus) / (2.0 * h)
    return relative_error(analytic[coords], numeric)
