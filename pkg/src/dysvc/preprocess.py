"""Stationary noise gating, energy-based silence trimming and click removal."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.ndimage

from .dsp.stft import istft, stft
from .dsp.types import Spectrogram, Waveform

log = logging.getLogger(__name__)

GATE_FFT = 1024
GATE_HOP = 256
TRIM_FRAME = 2048
TRIM_HOP = 512
_DIST_CLIP_DB = 30.0


@dataclass(frozen=True)
class NoiseProfile:
    mean_mag: np.ndarray
    std_mag: np.ndarray
    n_frames: int
    sample_rate: int
    fft_size: int = GATE_FFT


@dataclass(frozen=True)
class GateParams:
    n_std_thresh: float = 1.5
    attenuation_db: float = 30.0
    smoothing_bins: int = 4
    smoothing_frames: int = 4
    # width of the sigmoid transition, in dB of distance from the threshold
    softness_db: float = 1.0

    def __post_init__(self):
        if self.n_std_thresh <= 0:
            raise ValueError("n_std_thresh must be > 0")
        if self.attenuation_db < 0:
            raise ValueError("attenuation_db must be >= 0")


def estimate_noise_profile(
    w: Waveform, head_s: float = 0.5, fft_size: int = GATE_FFT, hop: int = GATE_HOP
) -> NoiseProfile:
    n_head = int(round(head_s * w.sample_rate))
    if n_head > len(w):
        log.warning(
            "signal (%.3f s) shorter than noise head %.3f s; profiling the whole signal",
            w.duration,
            head_s,
        )
        n_head = len(w)
    head = w.with_samples(w.samples[:n_head])
    mag = np.abs(stft(head, fft_size, hop).frames)
    n_bins = fft_size // 2 + 1
    if mag.shape[0] == 0:
        zeros = np.zeros(n_bins)
        return NoiseProfile(zeros, zeros.copy(), 0, w.sample_rate, fft_size)
    return NoiseProfile(mag.mean(axis=0), mag.std(axis=0), mag.shape[0], w.sample_rate, fft_size)


def _smoothing_kernel(n_bins: int, n_frames: int) -> np.ndarray:
    def tri(n):
        # triangle of half-width n + 1, peak at the centre
        return np.concatenate([np.arange(1, n + 2), np.arange(n, 0, -1)]).astype(np.float64)

    kernel = np.outer(tri(n_frames), tri(n_bins))
    return kernel / kernel.sum()


def gate_mask(mag: np.ndarray, p: NoiseProfile, g: GateParams) -> np.ndarray:
    """Soft gain mask in [floor, 1] for magnitudes ``mag`` of shape (T, F).

    The distance of each bin from the noise threshold (in dB) is smoothed over
    the time/frequency neighbourhood before the sigmoid, so isolated noise
    peaks stay gated while narrowband components keep unit gain.
    """
    thresh = p.mean_mag + g.n_std_thresh * p.std_mag
    floor = 10.0 ** (-g.attenuation_db / 20.0)
    if not np.any(thresh > 0):
        return np.ones_like(mag)
    with np.errstate(divide="ignore"):
        dist_db = 20.0 * (np.log10(np.maximum(mag, 1e-30)) - np.log10(thresh))
    # a zero threshold passes every bin
    dist_db = np.where(thresh > 0, dist_db, _DIST_CLIP_DB)
    dist_db = np.clip(dist_db, -_DIST_CLIP_DB, _DIST_CLIP_DB)
    if g.smoothing_bins > 0 or g.smoothing_frames > 0:
        dist_db = scipy.ndimage.convolve(
            dist_db, _smoothing_kernel(g.smoothing_bins, g.smoothing_frames), mode="nearest"
        )
    keep = 0.5 * (1.0 + np.tanh(0.5 * dist_db / g.softness_db))
    return floor + (1.0 - floor) * keep


def spectral_gate(w: Waveform, p: NoiseProfile, g: GateParams | None = None) -> Waveform:
    g = g or GateParams()
    if p.sample_rate != w.sample_rate:
        raise ValueError(f"profile sample rate {p.sample_rate} != waveform {w.sample_rate}")
    if len(w) == 0:
        return w
    spec = stft(w, p.fft_size, GATE_HOP)
    mask = gate_mask(np.abs(spec.frames), p, g)
    gated = Spectrogram(spec.frames * mask, spec.fft_size, spec.hop, spec.window, spec.length, spec.sample_rate)
    return istft(gated)


def _frame_rms(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    pad = frame // 2
    padded = np.pad(x, (pad, pad + frame))
    n_frames = 1 + len(x) // hop
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame)[::hop][:n_frames]
    return np.sqrt(np.mean(frames**2, axis=1))


def trim_bounds(
    w: Waveform, top_db: float = 30.0, frame: int = TRIM_FRAME, hop: int = TRIM_HOP
) -> tuple[int, int]:
    """Sample range [start, stop) kept by :func:`trim_silence`."""
    if len(w) == 0:
        return 0, 0
    rms = _frame_rms(w.samples, frame, hop)
    peak = rms.max()
    if peak <= 0:
        return 0, 0
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(np.maximum(rms, 1e-30) / peak)
    loud = np.flatnonzero(db > -top_db)
    start = int(loud[0] * hop)
    stop = int(min(len(w), (loud[-1] + 1) * hop))
    return start, stop


def trim_silence(w: Waveform, top_db: float = 30.0) -> Waveform:
    start, stop = trim_bounds(w, top_db)
    if stop <= start:
        log.warning("signal is entirely silent at top_db=%.1f; returning empty waveform", top_db)
        return w.with_samples(np.zeros(0))
    return w.with_samples(w.samples[start:stop])


def remove_clicks(w: Waveform, margin_s: float = 0.2) -> Waveform:
    margin = int(round(margin_s * w.sample_rate))
    if margin == 0:
        return w
    if len(w) <= 2 * margin:
        log.warning(
            "signal (%.3f s) not longer than 2 x click margin %.3f s; left unchanged",
            w.duration,
            margin_s,
        )
        return w
    return w.with_samples(w.samples[margin : len(w) - margin])


def preprocess_pipeline(
    w: Waveform,
    g: GateParams | None = None,
    top_db: float = 30.0,
    noise_head_s: float = 0.5,
    click_margin_s: float = 0.2,
    report: dict | None = None,
) -> Waveform:
    """Click removal, then noise gating profiled on the head, then silence trim.

    If ``report`` is given it is filled with the sample counts removed at each end.
    """
    clicked = remove_clicks(w, click_margin_s)
    denoised = spectral_gate(clicked, estimate_noise_profile(clicked, noise_head_s), g)
    start, stop = trim_bounds(denoised, top_db)
    if stop <= start:
        log.warning("nothing left after trimming; returning empty waveform")
        out = w.with_samples(np.zeros(0))
    else:
        out = denoised.with_samples(denoised.samples[start:stop])
    if report is not None:
        lead = (len(w) - len(clicked)) // 2
        report.update(
            input_samples=len(w),
            output_samples=len(out),
            click_samples_each_end=lead,
            trim_leading_samples=start,
            trim_trailing_samples=len(denoised) - stop if stop > start else len(denoised),
        )
    return out
