"""Dynamic time warping and duration matching between utterances."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WarpPath:
    steps: tuple[tuple[int, int], ...]
    cost: float

    @property
    def shape(self) -> tuple[int, int]:
        i, j = self.steps[-1]
        return i + 1, j + 1

    def transposed(self) -> "WarpPath":
        return WarpPath(tuple((j, i) for i, j in self.steps), self.cost)


def _as_sequence(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"feature sequence must be (T, D), got shape {x.shape}")
    return x


def frame_distances(X, Y) -> np.ndarray:
    X, Y = _as_sequence(X), _as_sequence(Y)
    diff = X[:, None, :] - Y[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def dtw(X, Y) -> WarpPath:
    """Globally optimal monotonic alignment under Euclidean frame distance.

    Steps (1,0), (0,1) and (1,1) carry no slope weights; the cost is the sum
    of frame distances over the visited cells. Among equal-cost predecessors
    the diagonal wins, then the step that advances ``X``.
    """
    X, Y = _as_sequence(X), _as_sequence(Y)
    if X.shape[0] == 0 or Y.shape[0] == 0:
        raise ValueError("dtw needs non-empty sequences")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"feature dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    d = frame_distances(X, Y)
    n, m = d.shape
    # plain Python floats: the recurrence is sequential along each row
    inf = float("inf")
    rows: list[list[float]] = []
    above = [inf] * m
    for i in range(n):
        di = d[i].tolist()
        row = [0.0] * m
        left = inf
        for j in range(m):
            if i == 0 and j == 0:
                best = 0.0
            else:
                best = above[j - 1] if j > 0 else inf
                if above[j] < best:
                    best = above[j]
                if left < best:
                    best = left
            left = row[j] = best + di[j]
        rows.append(row)
        above = row
    acc = np.array(rows)

    i, j = n - 1, m - 1
    steps = [(i, j)]
    while (i, j) != (0, 0):
        options = []
        if i > 0 and j > 0:
            options.append((acc[i - 1, j - 1], i - 1, j - 1))
        if i > 0:
            options.append((acc[i - 1, j], i - 1, j))
        if j > 0:
            options.append((acc[i, j - 1], i, j - 1))
        # min() keeps the first of equal keys, i.e. the preference order above
        _, i, j = min(options, key=lambda o: o[0])
        steps.append((i, j))
    steps.reverse()
    return WarpPath(tuple(steps), float(acc[n - 1, m - 1]))


def apply_warp(X, p: WarpPath, axis: str = "source") -> np.ndarray:
    """Map ``X`` onto the other sequence's timeline along ``p``.

    ``axis="source"`` treats ``X`` as the first sequence of the path and returns
    one frame per second-sequence index; several source frames mapped to one
    index are averaged. ``axis="target"`` does the reverse.
    """
    if axis not in ("source", "target"):
        raise ValueError(f"axis must be 'source' or 'target', got {axis!r}")
    arr = np.asarray(X, dtype=np.float64)
    squeeze = arr.ndim == 1
    seq = _as_sequence(arr)
    own, other = (0, 1) if axis == "source" else (1, 0)
    n_own, n_other = p.shape[own], p.shape[other]
    if seq.shape[0] != n_own:
        raise ValueError(f"path expects {n_own} frames on the {axis} axis, got {seq.shape[0]}")
    out = np.zeros((n_other, seq.shape[1]))
    counts = np.zeros(n_other)
    for step in p.steps:
        out[step[other]] += seq[step[own]]
        counts[step[other]] += 1
    out /= counts[:, None]
    return out[:, 0] if squeeze else out


def stretch_rate_for_target(src_dur: float, tgt_dur: float) -> float:
    """Time-stretch rate that brings a ``src_dur`` utterance to ``tgt_dur``."""
    if src_dur <= 0 or tgt_dur <= 0:
        raise ValueError(f"durations must be > 0, got {src_dur}, {tgt_dur}")
    return src_dur / tgt_dur
