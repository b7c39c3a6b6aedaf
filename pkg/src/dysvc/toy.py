"""Toy efficacy check on the synthetic corpus: does conversion move features towards the target domain?"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import build_manifest
from .cyclegan import DESK_OVERRIDES, TrainResult, convert_features, get_variant, train
from .cyclegan.convert import mel_config_for
from .dsp import mel_spectrogram, read_wav
from .preprocess import preprocess_pipeline


@dataclass
class EfficacyConfig:
    variant: str = "MaskCycleGAN-VC"
    scale: float = 100.0
    n_iters: int = 2000
    eval_speaker: str = "D01"
    target_speaker: str = "C01"
    # averaging window at each end of the generator loss curve
    window: int = 50
    seed: int = 0
    overrides: dict = field(default_factory=lambda: dict(DESK_OVERRIDES))


@dataclass
class EfficacyResult:
    closer: list[bool]  # per eval utterance: converted mean nearer the target centroid
    early_loss: float
    late_loss: float
    seconds: float
    result: TrainResult

    @property
    def closer_fraction(self) -> float:
        return float(np.mean(self.closer))

    @property
    def loss_ratio(self) -> float:
        return self.late_loss / self.early_loss


def centroid_distance(feats: np.ndarray, centroid: np.ndarray) -> float:
    """Mean absolute log-mel gap between an utterance's average frame and a domain centroid."""
    return float(np.abs(feats.mean(axis=0) - centroid).mean())


def run_efficacy(corpus_dir, cfg: EfficacyConfig | None = None) -> EfficacyResult:
    """Train on the three non-eval dysarthric speakers, convert the held-out one."""
    cfg = cfg or EfficacyConfig()
    meta = Path(corpus_dir) / "corpus.json"
    controls = json.loads(meta.read_text())["control_speakers"] if meta.exists() else [cfg.target_speaker]
    m = build_manifest(corpus_dir, control_speakers=controls)
    gan = get_variant(cfg.variant, **cfg.overrides).replace(scale=cfg.scale, n_iters=cfg.n_iters, seed=cfg.seed)

    feats = {}
    for u in m.utterances:
        w = preprocess_pipeline(read_wav(u.audio_path))
        feats[u.utterance_id] = mel_spectrogram(w, mel_config_for(gan, w.sample_rate)).frames
    train_spk = [s for s in m.speakers_with_role("dysarthric") if s != cfg.eval_speaker]
    src_utts = [u for s in train_spk for u in m.by_speaker(s)]
    tgt_utts = m.by_speaker(cfg.target_speaker)
    tgt_index = {u.word_id: k for k, u in enumerate(tgt_utts)}
    pairs = [(i, tgt_index[u.word_id]) for i, u in enumerate(src_utts) if u.word_id in tgt_index]
    src = [feats[u.utterance_id] for u in src_utts]
    tgt = [feats[u.utterance_id] for u in tgt_utts]

    t0 = time.perf_counter()
    res = train(gan, src, tgt, pairs=pairs)
    seconds = time.perf_counter() - t0

    cx, cy = np.concatenate(src).mean(axis=0), np.concatenate(tgt).mean(axis=0)
    closer = []
    for u in m.by_speaker(cfg.eval_speaker):
        out = convert_features(res.models, feats[u.utterance_id])
        closer.append(centroid_distance(out, cy) < centroid_distance(out, cx))
    g = res.series("g_total")
    return EfficacyResult(closer, float(g[: cfg.window].mean()), float(g[-cfg.window :].mean()), seconds, res)
