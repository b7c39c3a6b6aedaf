from __future__ import annotations

from functools import lru_cache

import numpy as np

from .stft import stft
from .types import MelConfig, MelSpectrogram, Spectrogram, Waveform



def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def mel_filterbank(cfg: MelConfig) -> np.ndarray:
    """Triangular filters on the HTK mel scale, shape (n_mels, fft_size // 2 + 1).

    Each triangle is area-normalised so bands of different width carry
    comparable energy.
    """
    cfg.validate()
    n_bins = cfg.fft_size // 2 + 1
    freqs = np.linspace(0.0, cfg.sample_rate / 2, n_bins)
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.f_max), cfg.n_mels + 2))
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (centre - lower)
    falling = (upper - freqs) / (upper - centre)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb *= (2.0 / (upper - lower))
    # bands narrower than one FFT bin would otherwise be empty
    empty = fb.sum(axis=1) == 0
    if np.any(empty):
        nearest = np.abs(freqs[None, :] - centre[empty]).argmin(axis=1)
        fb[np.flatnonzero(empty), nearest] = 2.0 / (upper[empty, 0] - lower[empty, 0])
    fb.setflags(write=False)
    return fb


def mel_spectrogram(w: Waveform, cfg: MelConfig | None = None) -> MelSpectrogram:
    """Natural-log mel power spectrogram, frames shape (T, n_mels)."""
    cfg = cfg or MelConfig(sample_rate=w.sample_rate)
    if cfg.sample_rate != w.sample_rate:
        raise ValueError(f"sample rate mismatch: {w.sample_rate} vs config {cfg.sample_rate}")
    spec = stft(w, cfg.fft_size, cfg.hop)
    return mel_from_spectrogram(spec, cfg)


def mel_from_spectrogram(spec: Spectrogram, cfg: MelConfig) -> MelSpectrogram:
    power = np.abs(spec.frames) ** 2
    mel = power @ mel_filterbank(cfg).T
    return MelSpectrogram(np.log(np.maximum(mel, cfg.log_floor)), cfg, spec.length)


def mel_to_linear(m: MelSpectrogram, n_iter: int = 50) -> Spectrogram:
    """Non-negative least-squares inversion of the mel filterbank.

    Returns a magnitude spectrogram (real, non-negative ``frames``). The power
    estimate starts from the clipped pseudo-inverse and is refined with
    multiplicative NNLS updates, which keep every entry non-negative.
    """
    cfg = m.config
    fb = mel_filterbank(cfg)
    target = np.exp(m.frames)
    target = np.where(m.frames <= np.log(cfg.log_floor) + 1e-6, 0.0, target)
    power = np.maximum(target @ np.linalg.pinv(fb).T, 0.0) + 1e-12
    gram = fb.T @ fb
    numer = target @ fb
    for _ in range(n_iter):
        denom = power @ gram + 1e-20
        power *= numer / denom
    mag = np.sqrt(power)
    return Spectrogram(mag.astype(np.complex128), cfg.fft_size, cfg.hop, "hann", m.length, cfg.sample_rate)
