from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn.tensor import reflect_indices


@dataclass(frozen=True)
class FrameMask:
    values: np.ndarray  # (L,) of {0, 1}; 0 marks a filled-in frame
    start: int
    width: int

    @property
    def masked_fraction(self) -> float:
        return self.width / self.values.shape[0]


def sample_segment(features: np.ndarray, segment_len: int, rng: np.random.Generator, start: int | None = None):
    """Random contiguous ``segment_len``-frame slice of ``features`` (T, D).

    Shorter inputs are reflect-padded at the end to exactly ``segment_len``.
    Returns ``(segment, start)``.
    """
    if segment_len < 1:
        raise ValueError("segment_len must be >= 1")
    n = features.shape[0]
    if n == 0:
        raise ValueError("cannot sample a segment from an empty feature sequence")
    if n <= segment_len:
        idx = reflect_indices(n, 0, segment_len - n)
        return features[idx], 0
    if start is None:
        start = int(rng.integers(0, n - segment_len + 1))
    return features[start : start + segment_len], start


def fif_mask(segment: np.ndarray, rng: np.random.Generator, width: int | None = None, start: int | None = None):
    """Zero a random run of frames (fill-in-the-frame augmentation).

    Width is uniform on {0, ..., L // 2}, start uniform over valid positions.
    Returns ``(masked_segment, FrameMask)``.
    """
    n = segment.shape[0]
    if width is None:
        width = int(rng.integers(0, n // 2 + 1))
    if start is None:
        start = int(rng.integers(0, n - width + 1))
    values = np.ones(n, dtype=segment.dtype)
    values[start : start + width] = 0
    return segment * values[:, None], FrameMask(values, start, width)


def expected_masked_fraction(segment_len: int) -> float:
    """Analytic mean masked fraction of :func:`fif_mask` for a given length."""
    half = segment_len // 2
    return (half / 2.0) / segment_len
