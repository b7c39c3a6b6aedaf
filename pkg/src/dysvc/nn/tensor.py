"""Reverse-mode differentiation over numpy arrays.

Operations run eagerly. While a :class:`Tape` is active, every primitive whose
inputs need gradients appends a record (output, inputs, vector-Jacobian
product) to it; :meth:`Tape.backward` replays the records in reverse.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

_ACTIVE: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_tape")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype.kind not in "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return slice_(self, index)


class Tape:
    """Ordered record of primitive applications for one forward pass."""

    def __init__(self):
        self.records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self.consumed = False

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def __len__(self) -> int:
        return len(self.records)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], vjp: Callable):
        out._tape = self
        self.records.append((out, inputs, vjp))

    def backward(self, loss: Tensor):
        """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if self.consumed:
            raise RuntimeError("tape already used for a backward pass; run a new forward pass")
        if loss._tape is not self:
            raise RuntimeError("backward called on a tensor that was not produced on this tape")
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        self.consumed = True
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for out, inputs, vjp in reversed(self.records):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for inp, gi in zip(inputs, vjp(g)):
                if gi is None or not inp.requires_grad:
                    continue
                if inp._tape is self:
                    key = id(inp)
                    grads[key] = grads[key] + gi if key in grads else gi
                else:
                    gi = gi.astype(inp.data.dtype, copy=False)
                    inp.grad = gi.copy() if inp.grad is None else inp.grad + gi


def backward(loss: Tensor):
    if loss._tape is None:
        raise RuntimeError("backward called without a recorded forward pass")
    loss._tape.backward(loss)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _result(data, inputs: Sequence[Tensor], vjp: Callable) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise FloatingPointError("primitive produced non-finite values")
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    if needs and _ACTIVE:
        _ACTIVE[-1].record(out, tuple(inputs), vjp)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g



def _const(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


# --- elementwise ---------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = (a, _const(b, a)) if isinstance(a, Tensor) else (_const(a, b), b)
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = (a, _const(b, a)) if isinstance(a, Tensor) else (_const(a, b), b)
    return _result(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = (a, _const(b, a)) if isinstance(a, Tensor) else (_const(a, b), b)
    return _result(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def square(x: Tensor) -> Tensor:
    return _result(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,))


def abs_(x: Tensor) -> Tensor:
    return _result(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def sigmoid(x: Tensor) -> Tensor:
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _result(s, (x,), lambda g: (g * s * (1.0 - s),))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    scale = np.where(x.data > 0, 1.0, slope).astype(x.data.dtype)
    return _result(x.data * scale, (x,), lambda g: (g * scale,))


def gated_linear_unit(a: Tensor, b: Tensor) -> Tensor:
    """``a * sigmoid(b)``."""
    if a.shape != b.shape:
        raise ValueError(f"gated_linear_unit: shape mismatch {a.shape} vs {b.shape}")
    s = 0.5 * (1.0 + np.tanh(0.5 * b.data))
    return _result(
        a.data * s,
        (a, b),
        lambda g: (g * s, g * a.data * s * (1.0 - s)),
    )


def glu(x: Tensor, axis: int = 1) -> Tensor:
    """Split ``x`` in half along ``axis`` and gate the first half with the second."""
    n = x.shape[axis]
    if n % 2:
        raise ValueError(f"glu: axis {axis} has odd size {n}")
    idx_a = [slice(None)] * x.ndim
    idx_b = [slice(None)] * x.ndim
    idx_a[axis] = slice(0, n // 2)
    idx_b[axis] = slice(n // 2, n)
    return gated_linear_unit(slice_(x, tuple(idx_a)), slice_(x, tuple(idx_b)))


# --- reductions and losses -------------------------------------------------


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), vjp)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, x.shape).astype(x.dtype),)

    return _result(np.mean(x.data, axis=axis, keepdims=keepdims), (x,), vjp)


def l1(a, b) -> Tensor:
    """Mean absolute difference."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"l1: shape mismatch {a.shape} vs {b.shape}")
    diff = a.data - b.data
    n = diff.size
    return _result(
        np.mean(np.abs(diff)),
        (a, b),
        lambda g: (g * np.sign(diff) / n, -g * np.sign(diff) / n),
    )


def l2(a, b) -> Tensor:
    """Mean squared difference."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"l2: shape mismatch {a.shape} vs {b.shape}")
    diff = a.data - b.data
    n = diff.size
    return _result(
        np.mean(diff * diff),
        (a, b),
        lambda g: (2.0 * g * diff / n, -2.0 * g * diff / n),
    )


# --- linear algebra and convolution ---------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ValueError(f"matmul: shape mismatch {a.shape} @ {b.shape}")

    def vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(a.data @ b.data, (a, b), vjp)


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation over the last axis. ``x``: (B, C, T), ``w``: (O, C, K)."""
    if x.ndim != 3 or w.ndim != 3 or x.shape[1] != w.shape[1]:
        raise ValueError(f"conv1d: incompatible shapes x={x.shape}, w={w.shape}")
    bsz, c, _ = x.shape
    o, _, k = w.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    t_pad = xp.shape[2]
    if t_pad < k:
        raise ValueError(f"conv1d: input length {t_pad} shorter than kernel {k}")
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)[:, :, ::stride, :]
    t_out = windows.shape[2]
    cols = windows.transpose(0, 2, 1, 3).reshape(bsz, t_out, c * k)
    wmat = w.data.reshape(o, c * k)
    out = (cols @ wmat.T).transpose(0, 2, 1)
    if b is not None:
        out = out + b.data[None, :, None]
    inputs = (x, w) if b is None else (x, w, b)

    def vjp(g):
        gt = g.transpose(0, 2, 1)  # (B, T_out, O)
        gw = np.einsum("bto,btk->ok", gt, cols).reshape(w.shape)
        dcols = (gt @ wmat).reshape(bsz, t_out, c, k)
        gxp = np.zeros_like(xp)
        stop = stride * (t_out - 1) + 1
        for j in range(k):
            gxp[:, :, j : j + stop : stride] += dcols[:, :, :, j].transpose(0, 2, 1)
        gx = gxp[:, :, padding : t_pad - padding] if padding else gxp
        grads = [gx, gw]
        if b is not None:
            grads.append(g.sum(axis=(0, 2)))
        return tuple(grads)

    return _result(out, inputs, vjp)


def instance_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise each (batch, channel) row of ``x`` (B, C, T) over time."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv

    def vjp(g):
        gm = g.mean(axis=-1, keepdims=True)
        gxm = (g * xhat).mean(axis=-1, keepdims=True)
        return (inv * (g - gm - xhat * gxm),)

    return _result(xhat, (x,), vjp)


# --- shape manipulation ------------------------------------------------------


def slice_(x: Tensor, index) -> Tensor:
    def vjp(g):
        out = np.zeros_like(x.data)
        if _has_advanced(index):
            np.add.at(out, index, g)
        else:
            out[index] = g
        return (out,)

    return _result(x.data[index], (x,), vjp)


def _has_advanced(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def take(x: Tensor, indices: np.ndarray, axis: int = -1) -> Tensor:
    indices = np.asarray(indices)
    axis = axis % x.ndim

    def vjp(g):
        out = np.zeros_like(x.data)
        idx = [slice(None)] * x.ndim
        idx[axis] = indices
        np.add.at(out, tuple(idx), g)
        return (out,)

    return _result(np.take(x.data, indices, axis=axis), (x,), vjp)


def pad(x: Tensor, before: int, after: int, mode: str = "constant") -> Tensor:
    """Pad the last axis, with zeros or by reflection."""
    n = x.shape[-1]
    if mode == "constant":
        widths = [(0, 0)] * (x.ndim - 1) + [(before, after)]
        return _result(
            np.pad(x.data, widths),
            (x,),
            lambda g: (g[..., before : before + n],),
        )
    if mode == "reflect":
        return take(x, reflect_indices(n, before, after), axis=-1)
    raise ValueError(f"pad: unknown mode {mode!r}")


def reflect_indices(n: int, before: int, after: int) -> np.ndarray:
    """Indices of a reflect-padded axis (edge sample not repeated), any pad length."""
    idx = np.arange(-before, n + after)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def vjp(g):
        out = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            out.append(g[tuple(idx)])
        return tuple(out)

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tensors, vjp)


def reshape(x: Tensor, shape) -> Tensor:
    return _result(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def upsample(x: Tensor, factor: int) -> Tensor:
    """Nearest-neighbour upsampling along the last axis."""
    n = x.shape[-1]
    return _result(
        np.repeat(x.data, factor, axis=-1),
        (x,),
        lambda g: (g.reshape(*g.shape[:-1], n, factor).sum(axis=-1),),
    )
