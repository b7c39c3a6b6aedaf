"""Alternating generator/discriminator training with the ablation switches."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..align import apply_warp, dtw
from ..nn import tensor as T
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from ..nn.optim import Adam, lr_at
from ..nn.tensor import Tape, Tensor
from .augment import fif_mask, sample_segment
from .config import GanConfig
from .losses import cycle_loss, identity_active, identity_loss, lsgan_discriminator, lsgan_generator, total_loss
from .models import ModelPair, frozen

log = logging.getLogger(__name__)


class TrainingAborted(RuntimeError):
    def __init__(self, message: str, checkpoint: Path | None = None):
        super().__init__(message)
        self.checkpoint = checkpoint


@dataclass
class TrainResult:
    models: ModelPair
    curves: list[tuple[int, str, float]] = field(default_factory=list)
    iterations: int = 0
    checkpoint: Path | None = None

    def series(self, name: str) -> np.ndarray:
        return np.array([v for _, n, v in self.curves if n == name])


def feature_stats(corpora: Sequence[Sequence[np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    frames = np.concatenate([f for corpus in corpora for f in corpus], axis=0)
    std = frames.std(axis=0)
    return frames.mean(axis=0), np.maximum(std, 1e-3)


def _batch(seg: np.ndarray) -> Tensor:
    # (L, D) frames -> (1, D, L) network layout
    return Tensor(np.ascontiguousarray(seg.T[None], dtype=np.float32))


def _mask_batch(values: np.ndarray) -> Tensor:
    return Tensor(values.astype(np.float32)[None, None, :])


def write_curves(path, curves):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["iteration", "loss_name", "value"])
        for it, name, value in curves:
            writer.writerow([it, name, repr(float(value))])


def read_curves(path) -> list[tuple[int, str, float]]:
    with open(path, newline="") as f:
        return [(int(r["iteration"]), r["loss_name"], float(r["value"])) for r in csv.DictReader(f)]


def prepare_pairs(cfg: GanConfig, src: Sequence[np.ndarray], tgt: Sequence[np.ndarray], pairs):
    """Source features warped onto their parallel target's timeline, one entry per pair."""
    if pairs is None:
        if len(src) != len(tgt):
            raise ValueError("DTW training needs parallel pairs; corpora differ in size and no pairs given")
        pairs = list(zip(range(len(src)), range(len(tgt))))
    warped = []
    for i, j in pairs:
        path = dtw(src[i], tgt[j])
        warped.append((apply_warp(src[i], path, axis="source"), tgt[j]))
    return warped


def train(
    cfg: GanConfig,
    src_corpus: Sequence[np.ndarray],
    tgt_corpus: Sequence[np.ndarray],
    pairs: Sequence[tuple[int, int]] | None = None,
    out_dir=None,
) -> TrainResult:
    """Train G: X->Y and F: Y->X on log-mel feature sequences (each (T, n_mels)).

    ``pairs`` lists parallel (source index, target index) pairs; it is needed
    for DTW training and defines the epoch length when given. Conversion-only
    switches (``ts_input``) do not affect training.
    """
    if not src_corpus or not tgt_corpus:
        raise ValueError("training needs non-empty source and target corpora")
    for feats in list(src_corpus) + list(tgt_corpus):
        if feats.ndim != 2 or feats.shape[1] != cfg.n_mels or feats.shape[0] == 0:
            raise ValueError(f"features must be non-empty (T, {cfg.n_mels}) arrays, got {feats.shape}")
    if cfg.ts_input:
        log.info("ts_input only affects conversion; training the shared non-TS weights")
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        (out_dir / "checkpoints").mkdir(parents=True, exist_ok=True)

    init_rng, sample_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2))
    mean, std = feature_stats([src_corpus, tgt_corpus])
    models = ModelPair.build(cfg, init_rng, mean, std)
    src = [models.normalise(f) for f in src_corpus]
    tgt = [models.normalise(f) for f in tgt_corpus]
    parallel = prepare_pairs(cfg, src, tgt, pairs) if cfg.use_dtw else None
    n_items = len(pairs) if pairs is not None else max(len(src), len(tgt))
    n_iters = cfg.iterations(n_items)
    sched = cfg.scaled_schedule
    L = cfg.segment_len

    gen_opt = Adam([p for m in models.generators for p in m.parameters()], 0.5, 0.999)
    disc_opt = Adam([p for m in models.discriminators for p in m.parameters()], 0.5, 0.999)
    G, F_, D_X, D_Y, D2_X, D2_Y = models.G, models.F, models.D_X, models.D_Y, models.D2_X, models.D2_Y
    train_cfg = cfg.training_key().to_dict()
    result = TrainResult(models)
    last_good = models.state_dict()

    def checkpoint(name: str, state, iteration: int) -> Path | None:
        if out_dir is None:
            return None
        return save_checkpoint(out_dir / "checkpoints" / name, state, iteration, train_cfg)

    for it in range(n_iters):
        lr_g = lr_at(sched, it, "generator")
        lr_d = lr_at(sched, it, "discriminator")
        if parallel is not None:
            xs, ys = parallel[int(sample_rng.integers(len(parallel)))]
            x_seg, start = sample_segment(xs, L, sample_rng)
            y_seg, _ = sample_segment(ys, L, sample_rng, start=start)
        else:
            x_seg, _ = sample_segment(src[int(sample_rng.integers(len(src)))], L, sample_rng)
            y_seg, _ = sample_segment(tgt[int(sample_rng.integers(len(tgt)))], L, sample_rng)
        x, y = _batch(x_seg), _batch(y_seg)
        if cfg.fif_da:
            x_masked, mx = fif_mask(x_seg, sample_rng)
            y_masked, my = fif_mask(y_seg, sample_rng)
            x_in, y_in = _batch(x_masked), _batch(y_masked)
            mask_x, mask_y = _mask_batch(mx.values), _mask_batch(my.values)
        else:
            x_in, y_in, mask_x, mask_y = x, y, None, None
        use_id = identity_active(cfg, it)

        try:
            with frozen(*models.discriminators), Tape() as tape:
                fake_y = G(x_in, mask_x)
                cyc_x = F_(fake_y)
                fake_x = F_(y_in, mask_y)
                cyc_y = G(fake_x)
                parts = {
                    "gan_g": lsgan_generator(D_Y(fake_y)),
                    "gan_f": lsgan_generator(D_X(fake_x)),
                    "cycle": cycle_loss(x, cyc_x, y, cyc_y, cfg.cycle_norm),
                }
                if use_id:
                    parts["identity"] = identity_loss(x, F_(x), y, G(y))
                if cfg.two_step:
                    parts["gan2"] = T.add(lsgan_generator(D2_X(cyc_x)), lsgan_generator(D2_Y(cyc_y)))
                g_total = total_loss(parts, cfg, it)
            gen_opt.zero_grad()
            tape.backward(g_total)
            gen_opt.step(lr_g)

            with Tape() as tape:
                d_adv = T.add(
                    lsgan_discriminator(D_Y(y), D_Y(fake_y.detach())),
                    lsgan_discriminator(D_X(x), D_X(fake_x.detach())),
                )
                d_total = d_adv
                if cfg.two_step:
                    d_adv2 = T.add(
                        lsgan_discriminator(D2_X(x), D2_X(cyc_x.detach())),
                        lsgan_discriminator(D2_Y(y), D2_Y(cyc_y.detach())),
                    )
                    d_total = T.add(d_adv, d_adv2)
            disc_opt.zero_grad()
            tape.backward(d_total)
            disc_opt.step(lr_d)
            for mod in models.generators + models.discriminators:
                for p in mod.parameters():
                    if not np.all(np.isfinite(p.data)):
                        raise FloatingPointError("parameter update produced non-finite values")
        except FloatingPointError as exc:
            models.load_state_dict(last_good)
            path = checkpoint("last_good", last_good, it)
            raise TrainingAborted(f"non-finite value at iteration {it}: {exc}", path) from exc

        row = [
            ("g_adv", parts["gan_g"].item() + parts["gan_f"].item()),
            ("cycle", parts["cycle"].item()),
            ("identity", parts["identity"].item() if use_id else 0.0),
        ]
        if cfg.two_step:
            row.append(("g_adv2", parts["gan2"].item()))
        row.append(("g_total", g_total.item()))
        row.append(("d_adv", d_adv.item()))
        if cfg.two_step:
            row.append(("d_adv2", d_adv2.item()))
        row += [("d_total", d_total.item()), ("lr_g", lr_g), ("lr_d", lr_d)]
        result.curves.extend((it, name, value) for name, value in row)
        last_good = models.state_dict()

        if cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0 and it + 1 < n_iters:
            checkpoint(f"iter_{it + 1:07d}", last_good, it + 1)

    result.iterations = n_iters
    result.checkpoint = checkpoint("final", models.state_dict(), n_iters)
    if out_dir is not None:
        write_curves(out_dir / "curves.csv", result.curves)
    return result


def load_models(path, cfg: GanConfig | None = None) -> tuple[ModelPair, GanConfig]:
    """Rebuild a :class:`ModelPair` from a checkpoint written by :func:`train`."""
    state, meta = load_checkpoint(path)
    saved = GanConfig.from_dict(meta["config"])
    cfg = cfg or saved
    models = ModelPair.build(saved, np.random.default_rng(0))
    models.load_state_dict(state)
    return models, cfg
