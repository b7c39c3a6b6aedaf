from __future__ import annotations

import numpy as np

from .stft import istft, stft
from .types import Spectrogram, Waveform


def spectral_convergence(mag: np.ndarray, estimate: np.ndarray) -> float:
    norm = np.linalg.norm(mag)
    if norm == 0:
        return 0.0
    return float(np.linalg.norm(np.abs(estimate) - mag) / norm)


def griffin_lim(
    mag: Spectrogram,
    n_iter: int = 60,
    length: int | None = None,
    return_history: bool = False,
):
    """Phase retrieval from a magnitude spectrogram.

    Starts from zero phase; with ``n_iter = 0`` the result is the zero-phase
    inverse. With ``return_history`` the per-iteration spectral convergence
    ``|| |STFT(x_k)| - mag || / ||mag||`` is returned alongside the waveform.
    """
    values = np.real_if_close(mag.frames)
    if np.isrealobj(values) and np.any(values < 0):
        raise ValueError("magnitude spectrogram must be non-negative")
    target = np.abs(values)
    n_out = mag.length if length is None else int(length)
    like = Spectrogram(target.astype(np.complex128), mag.fft_size, mag.hop, mag.window, n_out, mag.sample_rate)
    x = istft(like, strict=False)
    history = []
    for _ in range(n_iter):
        rebuilt = stft(x, mag.fft_size, mag.hop, mag.window)
        frames = rebuilt.frames[: target.shape[0]]
        history.append(spectral_convergence(target, frames))
        phase = np.exp(1j * np.angle(frames))
        x = istft(
            Spectrogram(target * phase, mag.fft_size, mag.hop, mag.window, n_out, mag.sample_rate),
            strict=False,
        )
    if return_history:
        final = stft(x, mag.fft_size, mag.hop, mag.window).frames[: target.shape[0]]
        history.append(spectral_convergence(target, final))
        return x, history
    return x


def _wrap(phase: np.ndarray) -> np.ndarray:
    return phase - 2.0 * np.pi * np.round(phase / (2.0 * np.pi))


def phase_vocoder(spec: Spectrogram, rate: float) -> Spectrogram:
    """Resample STFT frames at ``rate`` with linear magnitude interpolation.

    Phase is accumulated from the measured per-bin phase advance between
    neighbouring analysis frames, so partials keep their frequency.
    """
    if rate <= 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    frames = spec.frames
    n_frames, n_bins = frames.shape
    if n_frames == 0:
        return spec
    steps = np.arange(0.0, n_frames, rate)
    # one extra zero frame so the final interpolation has a right neighbour
    padded = np.vstack([frames, np.zeros((1, n_bins), dtype=frames.dtype)])
    expected = 2.0 * np.pi * spec.hop * np.arange(n_bins) / spec.fft_size
    phase = np.angle(frames[0])
    out = np.empty((steps.shape[0], n_bins), dtype=np.complex128)
    for k, step in enumerate(steps):
        i = int(step)
        alpha = step - i
        left, right = padded[i], padded[i + 1]
        mag = (1.0 - alpha) * np.abs(left) + alpha * np.abs(right)
        out[k] = mag * np.exp(1j * phase)
        delta = np.angle(right) - np.angle(left) - expected
        phase = phase + expected + _wrap(delta)
    return Spectrogram(out, spec.fft_size, spec.hop, spec.window, spec.length, spec.sample_rate)


def time_stretch(
    w: Waveform, rate: float, fft_size: int = 1024, hop: int = 256
) -> Waveform:
    """Change duration by ``1 / rate`` without changing pitch.

    ``rate > 1`` shortens the signal, ``rate < 1`` lengthens it.
    """
    if rate <= 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    if len(w) == 0:
        return w
    spec = stft(w, fft_size, hop)
    stretched = phase_vocoder(spec, rate)
    return istft(stretched, length=int(round(len(w) / rate)), strict=False)
