"""Synthetic two-domain word corpus: tone-sequence "words" at two pitch and rate regimes.

Control speakers say each phoneme as a 300-500 Hz tone with a weak second
harmonic. Dysarthric speakers say the same phonemes an octave lower, slower,
over a noisier floor. Every recording starts with a noise-only head and
carries one click near each end, so the preprocessing stage has work to do.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dsp.io import write_wav
from .dsp.types import MelConfig, Waveform
from .eval.per import PhonemeSequence, write_transcripts
from .eval.recognizer import build_inventory

PHONEMES = {"aa": 300.0, "eh": 350.0, "iy": 400.0, "ow": 450.0, "uw": 500.0}


@dataclass(frozen=True)
class Regime:
    pitch_factor: float
    phone_s: tuple[float, float]
    gap_s: float
    noise_std: float
    amplitude: float = 0.4
    harmonic: float = 0.3


CONTROL = Regime(1.0, (0.12, 0.18), 0.06, 0.002)
DYSARTHRIC = Regime(0.5, (0.22, 0.32), 0.10, 0.008)


@dataclass(frozen=True)
class SynthConfig:
    n_words: int = 8
    dysarthric: tuple[str, ...] = ("D01", "D02", "D03", "D04")
    control: tuple[str, ...] = ("C01",)
    sample_rate: int = 16000
    head_s: float = 0.75
    tail_s: float = 0.4
    click_amp: float = 0.8
    phones_per_word: tuple[int, int] = (2, 4)
    speaker_spread: float = 0.03
    seed: int = 0
    phonemes: dict = field(default_factory=lambda: dict(PHONEMES))

    def __post_init__(self):
        if self.head_s < 0.7:
            raise ValueError("the noise head must be at least 0.7 s (0.2 s click margin + 0.5 s profile)")
        if self.n_words < 1:
            raise ValueError("n_words must be >= 1")


def make_words(cfg: SynthConfig, rng: np.random.Generator) -> dict[str, tuple[str, ...]]:
    """Random phoneme strings with no immediate repeats, distinct per word."""
    labels = sorted(cfg.phonemes)
    words: dict[str, tuple[str, ...]] = {}
    seen = set()
    while len(words) < cfg.n_words:
        n = int(rng.integers(cfg.phones_per_word[0], cfg.phones_per_word[1] + 1))
        seq = [labels[int(rng.integers(len(labels)))]]
        while len(seq) < n:
            nxt = labels[int(rng.integers(len(labels)))]
            if nxt != seq[-1]:
                seq.append(nxt)
        if tuple(seq) not in seen:
            seen.add(tuple(seq))
            words[f"W{len(words) + 1:03d}"] = tuple(seq)
    return words


def tone(freq: float, dur_s: float, sr: int, amplitude: float = 0.4, harmonic: float = 0.3) -> np.ndarray:
    """Tone with a second harmonic and 10 ms raised-cosine edges."""
    n = int(round(dur_s * sr))
    t = np.arange(n) / sr
    x = amplitude * (np.sin(2 * np.pi * freq * t) + harmonic * np.sin(4 * np.pi * freq * t)) / (1 + harmonic)
    ramp = min(n // 2, int(0.01 * sr))
    if ramp:
        edge = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        x[:ramp] *= edge
        x[n - ramp :] *= edge[::-1]
    return x


def render_word(
    phones: tuple[str, ...], regime: Regime, speaker_factor: float, cfg: SynthConfig, rng: np.random.Generator
) -> np.ndarray:
    sr = cfg.sample_rate
    gap = np.zeros(int(round(regime.gap_s * sr)))
    parts = [np.zeros(int(round(cfg.head_s * sr)))]
    for k, ph in enumerate(phones):
        if k:
            parts.append(gap)
        dur = rng.uniform(*regime.phone_s)
        freq = cfg.phonemes[ph] * regime.pitch_factor * speaker_factor
        parts.append(tone(freq, dur, sr, regime.amplitude, regime.harmonic))
    parts.append(np.zeros(int(round(cfg.tail_s * sr))))
    x = np.concatenate(parts)
    x += regime.noise_std * rng.standard_normal(x.shape[0])
    margin = int(0.2 * sr)
    for lo in (0, x.shape[0] - margin):
        x[lo + int(rng.integers(margin))] += cfg.click_amp * rng.choice([-1.0, 1.0])
    return x


def synth_corpus(out_dir, cfg: SynthConfig | None = None) -> dict:
    """Write ``<speaker>_<word>.wav`` + ``.txt`` files, ``transcripts.tsv``,
    ``inventory.json`` and ``corpus.json`` under ``out_dir``. Returns the corpus metadata.
    """
    cfg = cfg or SynthConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    root_seq = np.random.SeedSequence(cfg.seed)
    word_seq, inv_seq, *spk_seqs = root_seq.spawn(2 + len(cfg.dysarthric) + len(cfg.control))
    words = make_words(cfg, np.random.default_rng(word_seq))
    speakers = [(s, DYSARTHRIC) for s in cfg.dysarthric] + [(s, CONTROL) for s in cfg.control]
    refs = {}
    for (spk, regime), seq in zip(speakers, spk_seqs):
        rng = np.random.default_rng(seq)
        factor = 1.0 + rng.uniform(-cfg.speaker_spread, cfg.speaker_spread)
        for word, phones in words.items():
            x = render_word(phones, regime, factor, cfg, rng)
            stem = out / f"{spk}_{word}"
            write_wav(stem.with_suffix(".wav"), Waveform(x, cfg.sample_rate))
            stem.with_suffix(".txt").write_text(" ".join(phones) + "\n")
            refs[f"{spk}_{word}"] = PhonemeSequence(phones, f"{spk}_{word}")
    write_transcripts(out / "transcripts.tsv", refs)

    inv_rng = np.random.default_rng(inv_seq)
    examples = {
        ph: [
            Waveform(
                tone(f, 0.5, cfg.sample_rate, CONTROL.amplitude, CONTROL.harmonic)
                + CONTROL.noise_std * inv_rng.standard_normal(int(0.5 * cfg.sample_rate)),
                cfg.sample_rate,
            )
        ]
        for ph, f in cfg.phonemes.items()
    }
    build_inventory(examples, MelConfig(sample_rate=cfg.sample_rate)).save(out / "inventory.json")
    meta = {
        "config": asdict(cfg),
        "words": {w: list(p) for w, p in words.items()},
        "control_speakers": list(cfg.control),
        "groups": [list(cfg.dysarthric)] if len(cfg.dysarthric) == 4 else [],
    }
    (out / "corpus.json").write_text(json.dumps(meta, indent=1))
    return meta
