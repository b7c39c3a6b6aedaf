"""Template-matching phoneme recogniser for desk-scale end-to-end runs.

This is a stand-in so the pipeline can be scored without an HMM ASR; its
error rates are not comparable to a real recogniser's.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..dsp.mel import mel_spectrogram
from ..dsp.types import MelConfig, Waveform
from .per import PhonemeSequence

SILENCE = "sil"


@dataclass(frozen=True)
class Inventory:
    labels: tuple[str, ...]
    prototypes: np.ndarray  # (n_labels, n_mels), shaped frames as from ``shape_frames``
    mel: MelConfig
    dynamic_range: float = 8.0  # nats kept below each frame's peak band
    silence_range: float = 7.0  # nats below the utterance's loudest frame
    min_run: int = 2

    def save(self, path):
        payload = {
            "labels": list(self.labels),
            "prototypes": self.prototypes.tolist(),
            "mel": {k: getattr(self.mel, k) for k in ("sample_rate", "fft_size", "hop", "n_mels", "fmin", "fmax", "log_floor")},
            "dynamic_range": self.dynamic_range,
            "silence_range": self.silence_range,
            "min_run": self.min_run,
        }
        Path(path).write_text(json.dumps(payload, indent=1))

    @classmethod
    def load(cls, path) -> "Inventory":
        d = json.loads(Path(path).read_text())
        return cls(
            tuple(d["labels"]),
            np.asarray(d["prototypes"], dtype=np.float64),
            MelConfig(**d["mel"]),
            d["dynamic_range"],
            d["silence_range"],
            d["min_run"],
        )


def shape_frames(logmel: np.ndarray, dynamic_range: float) -> np.ndarray:
    """Level-normalise log-mel frames: subtract each frame's peak, clip the floor."""
    peak = logmel.max(axis=1, keepdims=True)
    return np.maximum(logmel - peak, -dynamic_range)


def frame_levels(logmel: np.ndarray) -> np.ndarray:
    top = logmel.max(axis=1, keepdims=True)
    return (top + np.log(np.exp(logmel - top).sum(axis=1, keepdims=True)))[:, 0]


def build_inventory(
    examples: dict[str, list[Waveform]], mel: MelConfig, **kwargs
) -> Inventory:
    """Average shaped frames of each label's example recordings into a prototype.

    Only frames within ``silence_range`` of each recording's loudest frame count.
    """
    inv = Inventory((), np.zeros((0, mel.n_mels)), mel, **kwargs)
    labels, protos = [], []
    for label in sorted(examples):
        if label == SILENCE:
            continue
        frames = []
        for w in examples[label]:
            logmel = mel_spectrogram(w, mel).frames
            levels = frame_levels(logmel)
            loud = levels >= levels.max() - inv.silence_range
            frames.append(shape_frames(logmel[loud], inv.dynamic_range))
        labels.append(label)
        protos.append(np.concatenate(frames).mean(axis=0))
    return Inventory(tuple(labels), np.array(protos), mel, inv.dynamic_range, inv.silence_range, inv.min_run)


def label_frames(w: Waveform, inventory: Inventory) -> list[str]:
    logmel = mel_spectrogram(w, inventory.mel).frames
    if logmel.shape[0] == 0:
        return []
    levels = frame_levels(logmel)
    silent = (levels < levels.max() - inventory.silence_range) | (np.max(np.abs(w.samples)) == 0)
    shaped = shape_frames(logmel, inventory.dynamic_range)
    dist = ((shaped[:, None, :] - inventory.prototypes[None, :, :]) ** 2).sum(axis=2)
    nearest = dist.argmin(axis=1)
    return [SILENCE if silent[t] else inventory.labels[nearest[t]] for t in range(len(nearest))]


def _runs(labels: list[str]) -> list[tuple[str, int]]:
    runs: list[tuple[str, int]] = []
    for lab in labels:
        if runs and runs[-1][0] == lab:
            runs[-1] = (lab, runs[-1][1] + 1)
        else:
            runs.append((lab, 1))
    return runs


def toy_recognizer(w: Waveform, inventory: Inventory, utterance_id: str = "") -> PhonemeSequence:
    """Nearest-prototype frame labels, short runs dropped, collapsed, silence removed."""
    if not inventory.labels:
        raise ValueError("inventory is empty")
    runs = [r for r in _runs(label_frames(w, inventory)) if r[1] >= inventory.min_run]
    tokens = [lab for lab, _ in _runs([lab for lab, _ in runs])]
    return PhonemeSequence(tuple(t for t in tokens if t != SILENCE), utterance_id)
