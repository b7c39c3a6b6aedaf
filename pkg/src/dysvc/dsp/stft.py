"""Short-time Fourier analysis and least-squares overlap-add synthesis."""
from __future__ import annotations

import numpy as np
import scipy.signal

from .types import Spectrogram, Waveform

# windows whose squared overlap-add falls below this are treated as uncovered
_WSS_TINY = 1e-10


def get_window(name: str, fft_size: int) -> np.ndarray:
    # periodic (DFT-even) windows so that hop = fft/4 overlap-adds to a constant
    return scipy.signal.get_window(name, fft_size, fftbins=True).astype(np.float64)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def frame_count(n_samples: int, hop: int) -> int:
    """Number of centred frames for a signal of ``n_samples``."""
    if n_samples == 0:
        return 0
    return 1 + n_samples // hop


def stft(
    w: Waveform, fft_size: int = 1024, hop: int = 256, window: str = "hann"
) -> Spectrogram:
    """Centred STFT; the signal is zero-padded by ``fft_size // 2`` on both sides.

    Frame ``t`` is centred on sample ``t * hop``, giving ``1 + len // hop`` frames.
    An empty waveform yields a zero-frame spectrogram.
    """
    if not _is_power_of_two(fft_size):
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    if not 0 < hop <= fft_size:
        raise ValueError(f"hop must be in (0, fft_size], got {hop}")
    n = len(w)
    n_bins = fft_size // 2 + 1
    t = frame_count(n, hop)
    if t == 0:
        return Spectrogram(
            np.zeros((0, n_bins), dtype=np.complex128), fft_size, hop, window, 0, w.sample_rate
        )
    pad = fft_size // 2
    padded = np.pad(w.samples, (pad, pad + fft_size))
    frames = np.lib.stride_tricks.sliding_window_view(padded, fft_size)[::hop][:t]
    spec = np.fft.rfft(frames * get_window(window, fft_size), axis=1)
    return Spectrogram(spec, fft_size, hop, window, n, w.sample_rate)


def window_sumsquare(window: np.ndarray, n_frames: int, hop: int) -> np.ndarray:
    n = window.shape[0]
    out = np.zeros(n + hop * max(n_frames - 1, 0))
    sq = window**2
    for t in range(n_frames):
        out[t * hop : t * hop + n] += sq
    return out


def _overlap_add(frames_td: np.ndarray, hop: int) -> np.ndarray:
    t, n = frames_td.shape
    out = np.zeros(n + hop * max(t - 1, 0))
    for i in range(t):
        out[i * hop : i * hop + n] += frames_td[i]
    return out


def istft(s: Spectrogram, length: int | None = None, strict: bool = True) -> Waveform:
    """Least-squares inverse STFT (Griffin & Lim weighted overlap-add).

    The result has ``s.length`` samples unless ``length`` is given. With
    ``strict`` set, a window/hop pair that leaves part of the signal uncovered
    raises ``ValueError``; otherwise uncovered samples come back as zeros.
    """
    n_out = s.length if length is None else int(length)
    if s.n_frames == 0 or n_out == 0:
        return Waveform(np.zeros(n_out), s.sample_rate)
    win = get_window(s.window, s.fft_size)
    frames_td = np.fft.irfft(s.frames, n=s.fft_size, axis=1) * win
    y = _overlap_add(frames_td, s.hop)
    wss = window_sumsquare(win, s.n_frames, s.hop)
    pad = s.fft_size // 2
    region = slice(pad, pad + n_out)
    y = np.pad(y, (0, max(0, pad + n_out - y.shape[0])))[region]
    wss = np.pad(wss, (0, max(0, pad + n_out - wss.shape[0])))[region]
    covered = wss > _WSS_TINY
    if strict and not np.all(covered):
        raise ValueError(
            f"window '{s.window}' with hop {s.hop} does not satisfy the overlap-add "
            "condition over the signal span"
        )
    out = np.zeros(n_out)
    out[covered] = y[covered] / wss[covered]
    return Waveform(out, s.sample_rate)
