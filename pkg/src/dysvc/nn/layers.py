from __future__ import annotations

from collections import OrderedDict

import numpy as np

from . import tensor as T
from .tensor import Tensor


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


class Module:
    """Container of named parameters and sub-modules, in definition order."""

    def __init__(self):
        self._params: OrderedDict[str, Tensor] = OrderedDict()
        self._children: OrderedDict[str, Module] = OrderedDict()

    def __setattr__(self, key, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self.__dict__.setdefault("_params", OrderedDict())[key] = value
        elif isinstance(value, Module):
            self.__dict__.setdefault("_children", OrderedDict())[key] = value
        object.__setattr__(self, key, value)

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out = [(prefix + name, p) for name, p in self._params.items()]
        for name, child in self._children.items():
            out.extend(child.named_parameters(f"{prefix}{name}."))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> OrderedDict[str, np.ndarray]:
        return OrderedDict((n, p.data.copy()) for n, p in self.named_parameters())

    def load_state_dict(self, state):
        params = dict(self.named_parameters())
        if set(params) != set(state):
            raise KeyError(
                f"state mismatch: missing {sorted(set(params) - set(state))}, "
                f"unexpected {sorted(set(state) - set(params))}"
            )
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ValueError(f"{name}: shape {value.shape} != {p.shape}")
            p.data = value.astype(p.data.dtype).copy()

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Conv1d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding: int | None = None, dtype=np.float32, init_std: float | None = None):
        super().__init__()
        self.stride = stride
        self.padding = (kernel - 1) // 2 if padding is None else padding
        fan_in = in_ch * kernel
        std = np.sqrt(1.0 / fan_in) if init_std is None else init_std
        self.weight = parameter(rng.normal(0.0, std, (out_ch, in_ch, kernel)).astype(dtype))
        self.bias = parameter(np.zeros(out_ch, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return T.conv1d(x, self.weight, self.bias, self.stride, self.padding)


class InstanceNorm(Module):
    """Instance normalisation with a learned per-channel scale and shift."""

    def __init__(self, channels: int, dtype=np.float32):
        super().__init__()
        self.gamma = parameter(np.ones((1, channels, 1), dtype=dtype))
        self.beta = parameter(np.zeros((1, channels, 1), dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return T.add(T.mul(T.instance_norm(x), self.gamma), self.beta)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.weight = parameter(rng.normal(0.0, np.sqrt(1.0 / in_features), (in_features, out_features)).astype(dtype))
        self.bias = parameter(np.zeros(out_features, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return T.add(T.matmul(x, self.weight), self.bias)
