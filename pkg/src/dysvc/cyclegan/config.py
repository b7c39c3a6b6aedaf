"""Training configuration and the registry of named ablation variants."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..nn.optim import LrSchedule

TS_SUFFIX = " + TS"


@dataclass(frozen=True)
class GanConfig:
    cycle_norm: str = "L1"
    two_step: bool = False
    use_dtw: bool = False
    fif_da: bool = False
    ts_input: bool = False
    lambda_cycle: float = 10.0
    lambda_id: float = 5.0
    id_zero_after: float = 1e4
    segment_len: int = 128
    batch_size: int = 1
    epochs: int = 1000
    schedule: LrSchedule = field(default_factory=LrSchedule)
    seed: int = 0
    # divides every iteration count (schedule, identity cut-off, epochs x items)
    scale: float = 1.0
    # fixed iteration budget; overrides epochs when set
    n_iters: int | None = None
    checkpoint_every: int = 0
    n_mels: int = 80
    gen_channels: int = 32
    disc_channels: int = 32
    n_res_blocks: int = 2
    # "none" keeps stationary spectral content visible to the networks
    norm: str = "instance"
    griffin_lim_iters: int = 60
    # log-mel floor for network features; flattens the random log of gated noise
    mel_floor: float = 1e-2

    def __post_init__(self):
        if self.cycle_norm not in ("L1", "L2"):
            raise ValueError(f"cycle_norm must be 'L1' or 'L2', got {self.cycle_norm!r}")
        if self.norm not in ("instance", "none"):
            raise ValueError(f"norm must be 'instance' or 'none', got {self.norm!r}")
        if self.segment_len < 1:
            raise ValueError("segment_len must be >= 1")
        if self.lambda_cycle < 0 or self.lambda_id < 0:
            raise ValueError("loss weights must be >= 0")
        if self.batch_size != 1:
            raise ValueError("only batch_size = 1 is supported")
        if self.scale <= 0:
            raise ValueError("scale must be > 0")
        if self.gen_channels > 64 or self.disc_channels > 64:
            raise ValueError("channel counts above 64 are outside the supported desk scale")
        if isinstance(self.schedule, dict):
            object.__setattr__(self, "schedule", LrSchedule(**self.schedule))

    @property
    def scaled_schedule(self) -> LrSchedule:
        return self.schedule.scaled(self.scale)

    @property
    def scaled_id_zero_after(self) -> float:
        return self.id_zero_after / self.scale

    def iterations(self, n_items: int) -> int:
        if self.n_iters is not None:
            return int(self.n_iters)
        return max(1, math.ceil(self.epochs * n_items / self.scale))

    def replace(self, **changes) -> "GanConfig":
        return dataclasses.replace(self, **changes)

    def training_key(self) -> "GanConfig":
        """The config with conversion-only switches cleared; TS variants share weights."""
        return self.replace(ts_input=False)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GanConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown GanConfig fields: {', '.join(unknown)}")
        if "schedule" in d and isinstance(d["schedule"], dict):
            d["schedule"] = LrSchedule(**d["schedule"])
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "GanConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _registry() -> dict[str, GanConfig]:
    base = GanConfig()
    mask = base.replace(
        two_step=True,
        fif_da=True,
        segment_len=64,
        epochs=300,
        schedule=LrSchedule(decay_start=1e4),
    )
    return {
        "CycleGAN-VC": base,
        "DiscoGAN": base.replace(cycle_norm="L2", use_dtw=True),
        "CycleGAN-VC + DTW": base.replace(use_dtw=True),
        "CycleGAN-VC + 2-STEP": base.replace(two_step=True),
        "CycleGAN-VC + DTW + 2-STEP": base.replace(two_step=True, use_dtw=True),
        "MaskCycleGAN-VC": mask,
    }


BASE_VARIANTS: dict[str, GanConfig] = _registry()

# laptop-sized networks used for the synthetic corpus; applied on top of any variant
DESK_OVERRIDES = {"n_mels": 40, "gen_channels": 32, "disc_channels": 16, "norm": "none"}


def variant_names(include_ts: bool = True) -> list[str]:
    names = list(BASE_VARIANTS)
    if include_ts:
        names += [n + TS_SUFFIX for n in BASE_VARIANTS]
    return names


def base_name(name: str) -> str:
    return name[: -len(TS_SUFFIX)] if name.endswith(TS_SUFFIX) else name


def get_variant(name: str, **overrides) -> GanConfig:
    base = base_name(name)
    if base not in BASE_VARIANTS:
        raise KeyError(f"unknown variant {name!r}; valid names: {', '.join(variant_names())}")
    cfg = BASE_VARIANTS[base].replace(ts_input=name.endswith(TS_SUFFIX))
    return cfg.replace(**overrides) if overrides else cfg
