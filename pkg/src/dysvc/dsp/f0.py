from __future__ import annotations

import numpy as np

from .stft import frame_count
from .types import F0Stats, F0Track, Waveform


def estimate_f0(
    w: Waveform,
    fmin: float = 60.0,
    fmax: float = 400.0,
    hop: int = 256,
    frame_size: int = 1024,
    energy_threshold: float = 1e-4,
    voicing_threshold: float = 0.5,
) -> F0Track:
    """Autocorrelation pitch tracker.

    A frame is voiced when its RMS exceeds ``energy_threshold`` and the
    normalised autocorrelation peak inside ``[sr/fmax, sr/fmin]`` exceeds
    ``voicing_threshold``. The peak lag is refined by parabolic interpolation.
    Frames are centred like the STFT frames, so tracks line up with features.
    """
    if not fmin < fmax:
        raise ValueError(f"fmin must be < fmax, got {fmin}, {fmax}")
    sr = w.sample_rate
    n = len(w)
    n_frames = frame_count(n, hop)
    values = np.zeros(n_frames)
    if n_frames == 0:
        return F0Track(values, hop, sr)
    lag_min = max(1, int(np.floor(sr / fmax)))
    lag_max = min(frame_size - 2, int(np.ceil(sr / fmin)))
    pad = frame_size // 2
    padded = np.pad(w.samples, (pad, pad + frame_size))
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame_size)[::hop][:n_frames]
    frames = frames - frames.mean(axis=1, keepdims=True)
    rms = np.sqrt(np.mean(frames**2, axis=1))
    spec = np.fft.rfft(frames, n=2 * frame_size, axis=1)
    ac = np.fft.irfft(np.abs(spec) ** 2, axis=1)[:, :frame_size]
    energy = ac[:, 0]
    for t in np.flatnonzero((rms > energy_threshold) & (energy > 0)):
        r = ac[t] / energy[t]
        seg = r[lag_min : lag_max + 1]
        k = int(np.argmax(seg)) + lag_min
        if r[k] < voicing_threshold:
            continue
        lag = float(k)
        if 0 < k < frame_size - 1:
            a, b, c = r[k - 1], r[k], r[k + 1]
            denom = a - 2 * b + c
            if denom < 0:
                lag = k + 0.5 * (a - c) / denom
        values[t] = sr / lag
    return F0Track(values, hop, sr)


def f0_stats(tracks, speaker_id: str = "") -> F0Stats:
    """Mean and standard deviation of log-F0 over the voiced frames of ``tracks``."""
    if isinstance(tracks, F0Track):
        tracks = [tracks]
    voiced = np.concatenate([t.values[t.values > 0] for t in tracks] or [np.zeros(0)])
    if voiced.size == 0:
        raise ValueError(f"no voiced frames for speaker '{speaker_id}'")
    logs = np.log(voiced)
    return F0Stats(float(logs.mean()), float(logs.std()), speaker_id)


def convert_f0(f: F0Track, src: F0Stats, tgt: F0Stats) -> F0Track:
    """Log-Gaussian F0 mapping from the source speaker's statistics to the target's."""
    if src.sigma <= 0:
        raise ValueError("source F0 sigma must be > 0")
    out = np.zeros_like(f.values)
    voiced = f.values > 0
    out[voiced] = np.exp((np.log(f.values[voiced]) - src.mu) / src.sigma * tgt.sigma + tgt.mu)
    return F0Track(out, f.hop, f.sample_rate)
