"""Desk-scale gated-convolution generator and strided-convolution discriminator."""
from __future__ import annotations

from collections import OrderedDict
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from ..nn import tensor as T
from ..nn.layers import Conv1d, InstanceNorm, Module
from ..nn.tensor import Tensor
from .config import GanConfig


NORMS = ("instance", "none")


class Identity(Module):
    def forward(self, x: Tensor) -> Tensor:
        return x


def make_norm(kind: str, channels: int, dtype) -> Module:
    if kind == "instance":
        return InstanceNorm(channels, dtype)
    if kind == "none":
        return Identity()
    raise ValueError(f"norm must be one of {NORMS}, got {kind!r}")


class ResidualBlock(Module):
    def __init__(self, ch: int, rng, dtype, norm: str = "instance"):
        super().__init__()
        self.conv1 = Conv1d(ch, 2 * ch, 3, rng, dtype=dtype)
        self.norm1 = make_norm(norm, 2 * ch, dtype)
        self.conv2 = Conv1d(ch, ch, 3, rng, dtype=dtype)
        self.norm2 = make_norm(norm, ch, dtype)

    def forward(self, h):
        z = T.glu(self.norm1(self.conv1(h)))
        return T.add(h, self.norm2(self.conv2(z)))


class Generator(Module):
    """Maps (B, n_mels, T) features to the other domain; T must be even.

    With ``mask_channel`` a per-frame keep/fill mask is appended to the input
    as one extra channel. The output adds a learned correction to the input.
    """

    def __init__(
        self,
        n_mels: int,
        channels: int,
        n_res: int,
        rng,
        mask_channel: bool = False,
        dtype=np.float32,
        norm: str = "instance",
    ):
        super().__init__()
        self.mask_channel = mask_channel
        in_ch = n_mels + (1 if mask_channel else 0)
        self.conv_in = Conv1d(in_ch, 2 * channels, 5, rng, dtype=dtype)
        self.conv_down = Conv1d(channels, 2 * channels, 5, rng, stride=2, padding=2, dtype=dtype)
        self.norm_down = make_norm(norm, 2 * channels, dtype)
        self.blocks = []
        for k in range(n_res):
            block = ResidualBlock(channels, rng, dtype, norm)
            setattr(self, f"res{k}", block)
            self.blocks.append(block)
        self.conv_up = Conv1d(channels, 2 * channels, 5, rng, dtype=dtype)
        self.norm_up = make_norm(norm, 2 * channels, dtype)
        self.conv_out = Conv1d(channels, n_mels, 5, rng, dtype=dtype, init_std=0.01)

    def forward(self, x: Tensor, mask: Tensor | None = None) -> Tensor:
        if x.shape[-1] % 2:
            raise ValueError(f"generator input length must be even, got {x.shape[-1]}")
        inp = x
        if self.mask_channel:
            if mask is None:
                mask = Tensor(np.ones((x.shape[0], 1, x.shape[-1]), dtype=x.dtype))
            inp = T.concat([x, mask], axis=1)
        h = T.glu(self.conv_in(inp))
        h = T.glu(self.norm_down(self.conv_down(h)))
        for block in self.blocks:
            h = block(h)
        h = T.glu(self.norm_up(self.conv_up(T.upsample(h, 2))))
        return T.add(x, self.conv_out(h))

    def make_identity(self):
        """Zero the output layer so the generator returns its input unchanged."""
        self.conv_out.weight.data[...] = 0
        self.conv_out.bias.data[...] = 0


class Discriminator(Module):
    """Patch classifier over (B, n_mels, T); outputs (B, 1, ~T/4) real/fake scores."""

    def __init__(self, n_mels: int, channels: int, rng, dtype=np.float32, norm: str = "instance"):
        super().__init__()
        self.conv1 = Conv1d(n_mels, channels, 3, rng, dtype=dtype)
        self.conv2 = Conv1d(channels, channels, 3, rng, stride=2, padding=1, dtype=dtype)
        self.norm2 = make_norm(norm, channels, dtype)
        self.conv3 = Conv1d(channels, channels, 3, rng, stride=2, padding=1, dtype=dtype)
        self.norm3 = make_norm(norm, channels, dtype)
        self.conv_out = Conv1d(channels, 1, 3, rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        h = T.leaky_relu(self.conv1(x))
        h = T.leaky_relu(self.norm2(self.conv2(h)))
        h = T.leaky_relu(self.norm3(self.conv3(h)))
        return self.conv_out(h)


@contextmanager
def frozen(*modules: Module):
    """Temporarily exclude the modules' parameters from gradient tracking."""
    params = [p for m in modules if m is not None for p in m.parameters()]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p in params:
            p.requires_grad = True


@dataclass
class ModelPair:
    """Generators G (X->Y) and F (Y->X), discriminators, and feature normalisation."""

    G: Generator
    F: Generator
    D_X: Discriminator
    D_Y: Discriminator
    D2_X: Discriminator | None
    D2_Y: Discriminator | None
    feat_mean: np.ndarray
    feat_std: np.ndarray

    @classmethod
    def build(cls, cfg: GanConfig, rng: np.random.Generator, feat_mean=None, feat_std=None, dtype=np.float32):
        m, c, dc, n = cfg.n_mels, cfg.gen_channels, cfg.disc_channels, cfg.norm
        G = Generator(m, c, cfg.n_res_blocks, rng, cfg.fif_da, dtype, n)
        F = Generator(m, c, cfg.n_res_blocks, rng, cfg.fif_da, dtype, n)
        D_X = Discriminator(m, dc, rng, dtype, n)
        D_Y = Discriminator(m, dc, rng, dtype, n)
        D2_X = Discriminator(m, dc, rng, dtype, n) if cfg.two_step else None
        D2_Y = Discriminator(m, dc, rng, dtype, n) if cfg.two_step else None
        mean = np.zeros(m) if feat_mean is None else np.asarray(feat_mean, dtype=np.float64)
        std = np.ones(m) if feat_std is None else np.asarray(feat_std, dtype=np.float64)
        return cls(G, F, D_X, D_Y, D2_X, D2_Y, mean, std)

    def named_modules(self) -> list[tuple[str, Module]]:
        mods = [("G", self.G), ("F", self.F), ("D_X", self.D_X), ("D_Y", self.D_Y)]
        if self.D2_X is not None:
            mods += [("D2_X", self.D2_X), ("D2_Y", self.D2_Y)]
        return mods

    @property
    def generators(self) -> list[Module]:
        return [self.G, self.F]

    @property
    def discriminators(self) -> list[Module]:
        return [m for name, m in self.named_modules() if name.startswith("D")]

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict()
        for name, mod in self.named_modules():
            for pname, arr in mod.state_dict().items():
                state[f"{name}.{pname}"] = arr
        state["norm.mean"] = self.feat_mean.astype(np.float32)
        state["norm.std"] = self.feat_std.astype(np.float32)
        return state

    def load_state_dict(self, state):
        for name, mod in self.named_modules():
            prefix = name + "."
            mod.load_state_dict({k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)})
        self.feat_mean = np.asarray(state["norm.mean"], dtype=np.float64)
        self.feat_std = np.asarray(state["norm.std"], dtype=np.float64)

    def normalise(self, feats: np.ndarray) -> np.ndarray:
        return (feats - self.feat_mean) / self.feat_std

    def denormalise(self, feats: np.ndarray) -> np.ndarray:
        return feats * self.feat_std + self.feat_mean
