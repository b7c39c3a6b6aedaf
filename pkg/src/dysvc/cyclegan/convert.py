"""Utterance conversion: optional time stretch, log-mel, generator, mel inversion, Griffin-Lim."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..align import stretch_rate_for_target
from ..dsp import (
    F0Stats,
    F0Track,
    MelConfig,
    MelSpectrogram,
    Waveform,
    convert_f0,
    estimate_f0,
    griffin_lim,
    mel_spectrogram,
    mel_to_linear,
    time_stretch,
)
from ..nn.tensor import Tensor
from .config import GanConfig
from .models import ModelPair

log = logging.getLogger(__name__)

DIRECTIONS = ("x2y", "y2x")


@dataclass
class Conversion:
    waveform: Waveform
    mel_in: np.ndarray  # (T, n_mels) log-mel fed to the generator
    mel_out: np.ndarray  # (T, n_mels) generator output, denormalised
    stretch_rate: float = 1.0
    f0: F0Track | None = None


def mel_config_for(cfg: GanConfig, sample_rate: int) -> MelConfig:
    return MelConfig(sample_rate=sample_rate, n_mels=cfg.n_mels, log_floor=cfg.mel_floor)


def convert_features(models: ModelPair, feats: np.ndarray, direction: str = "x2y") -> np.ndarray:
    """Run a (T, n_mels) log-mel sequence through G (x2y) or F (y2x)."""
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    n = feats.shape[0]
    if n == 0:
        return feats.copy()
    gen = models.G if direction == "x2y" else models.F
    z = models.normalise(feats)
    if n % 2:
        z = np.concatenate([z, z[-1:]], axis=0)
    out = gen(Tensor(np.ascontiguousarray(z.T[None], dtype=np.float32))).data[0].T[:n]
    return models.denormalise(out.astype(np.float64))


def convert(
    models: ModelPair,
    utt: Waveform,
    cfg: GanConfig,
    direction: str = "x2y",
    target_duration: float | None = None,
    src_stats: F0Stats | None = None,
    tgt_stats: F0Stats | None = None,
    report_f0: bool = False,
    f0_range: tuple[float, float] = (60.0, 400.0),
    mel_cfg: MelConfig | None = None,
) -> Conversion:
    """Convert one utterance to the other domain.

    With ``cfg.ts_input`` the source is first stretched to ``target_duration``
    seconds. Pitch is not imposed on the vocoder output; the converted F0
    contour is only reported when ``report_f0`` is set and both stats exist.
    """
    if len(utt) == 0:
        raise ValueError("cannot convert an empty waveform")
    mel_cfg = mel_cfg or mel_config_for(cfg, utt.sample_rate)
    rate = 1.0
    if cfg.ts_input:
        if target_duration is None:
            log.warning("ts_input set but no target duration given; converting unstretched")
        else:
            rate = stretch_rate_for_target(utt.duration, target_duration)
            utt = time_stretch(utt, rate, mel_cfg.fft_size, mel_cfg.hop)
    mel_in = mel_spectrogram(utt, mel_cfg).frames
    mel_out = convert_features(models, mel_in, direction)
    mag = mel_to_linear(MelSpectrogram(mel_out, mel_cfg, len(utt)))
    wav = griffin_lim(mag, n_iter=cfg.griffin_lim_iters, length=len(utt))
    f0 = None
    if report_f0:
        if src_stats is None or tgt_stats is None:
            log.warning("F0 statistics missing for one of the speakers; skipping F0 conversion")
        else:
            f0 = convert_f0(estimate_f0(utt, *f0_range, hop=mel_cfg.hop), src_stats, tgt_stats)
    return Conversion(wav, mel_in, mel_out, rate, f0)
