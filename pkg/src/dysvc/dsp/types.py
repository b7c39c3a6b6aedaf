from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return Waveform(samples, self.sample_rate)


@dataclass(frozen=True)
class Spectrogram:
    """Complex STFT frames, shape (T, fft_size // 2 + 1).

    ``length`` is the number of samples of the analysed signal, kept so the
    inverse transform can return a signal of matching length.
    """

    frames: np.ndarray
    fft_size: int
    hop: int
    window: str = "hann"
    length: int = 0
    sample_rate: int = 16000

    def __post_init__(self):
        if self.hop > self.fft_size:
            raise ValueError("hop must not exceed fft_size")
        if self.frames.ndim != 2 or self.frames.shape[1] != self.fft_size // 2 + 1:
            raise ValueError(
                f"frames must be (T, {self.fft_size // 2 + 1}), got {self.frames.shape}"
            )

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.frames)


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 16000
    fft_size: int = 1024
    hop: int = 256
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float | None = None
    # mel power below this is clamped before the log
    log_floor: float = 1e-10

    @property
    def f_max(self) -> float:
        return self.sample_rate / 2 if self.fmax is None else float(self.fmax)

    def validate(self):
        if self.n_mels < 1:
            raise ValueError("n_mels must be >= 1")
        if not self.log_floor > 0:
            raise ValueError("log_floor must be > 0")
        if not (0 <= self.fmin < self.f_max <= self.sample_rate / 2):
            raise ValueError(
                f"need 0 <= fmin < fmax <= Nyquist, got fmin={self.fmin}, fmax={self.f_max}"
            )


@dataclass(frozen=True)
class MelSpectrogram:
    """Log-mel frames, shape (T, n_mels)."""

    frames: np.ndarray
    config: MelConfig = field(default_factory=MelConfig)
    length: int = 0

    @property
    def n_mels(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class F0Track:
    values: np.ndarray
    hop: int
    sample_rate: int = 16000

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("F0 values must be finite and >= 0")
        object.__setattr__(self, "values", values)

    @property
    def voiced(self) -> np.ndarray:
        return self.values > 0


@dataclass(frozen=True)
class F0Stats:
    mu: float
    sigma: float
    speaker_id: str = ""

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
