"""PCM16 WAV reading/writing and raw feature dumps."""
from __future__ import annotations

import json
import wave
from pathlib import Path

import numpy as np

from .types import Waveform


def read_wav(path) -> Waveform:
    with wave.open(str(path), "rb") as f:
        if f.getsampwidth() != 2:
            raise ValueError(f"{path}: only 16-bit PCM is supported")
        n_channels = f.getnchannels()
        sr = f.getframerate()
        raw = f.readframes(f.getnframes())
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return Waveform(data, sr)


def write_wav(path, w: Waveform):
    pcm = np.clip(np.round(w.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(int(w.sample_rate))
        f.writeframes(pcm.tobytes())


def wav_duration(path) -> float:
    """Duration in seconds from the header alone."""
    with wave.open(str(path), "rb") as f:
        return f.getnframes() / f.getframerate()


def save_features(path, frames: np.ndarray, hop: int, sample_rate: int, **extra):
    """Write ``frames`` as flat little-endian float32 with a ``.json`` sidecar."""
    path = Path(path)
    arr = np.ascontiguousarray(frames, dtype="<f4")
    path.write_bytes(arr.tobytes())
    header = {"shape": list(arr.shape), "dtype": "float32", "hop": hop, "sample_rate": sample_rate}
    header.update(extra)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(header, indent=2, sort_keys=True))


def load_features(path):
    path = Path(path)
    header = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    frames = np.frombuffer(path.read_bytes(), dtype="<f4").reshape(header["shape"])
    return frames.astype(np.float64), header
