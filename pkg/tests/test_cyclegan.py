import importlib
import logging

import numpy as np
import pytest
from conftest import SR, sine
from gradcases import LOSSES, gradient_error
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import chisquare

from dysvc.cyclegan import (
    BASE_VARIANTS,
    DESK_OVERRIDES,
    GanConfig,
    ModelPair,
    TrainingAborted,
    adversarial_loss,
    convert,
    convert_features,
    cycle_loss,
    expected_masked_fraction,
    fif_mask,
    get_variant,
    identity_active,
    identity_loss,
    load_models,
    read_curves,
    sample_segment,
    second_adversarial_loss,
    total_loss,
    train,
    variant_names,
)
from dysvc.dsp import F0Stats
from dysvc.nn import LrSchedule, Tensor, file_sha256

train_mod = importlib.import_module("dysvc.cyclegan.train")


def const(v):
    return lambda batch: Tensor(np.full((1, 1, 3), float(v)))


# --- losses ---------------------------------------------------------------


def test_adversarial_examples():
    z = np.zeros((1, 2, 4))
    perfect = lambda b: Tensor(np.where(b.data.sum() > 0, 1.0, 0.0) * np.ones((1, 1, 3)))
    assert adversarial_loss(perfect, z + 1, z, "discriminator").item() == 0.0
    assert adversarial_loss(const(0.5), z, z, "discriminator").item() == pytest.approx(0.5)
    assert adversarial_loss(const(1.0), z, z, "generator").item() == 0.0
    with pytest.raises(ValueError):
        adversarial_loss(const(1.0), z, z, "referee")


def test_second_adversarial_examples():
    z = np.zeros((1, 2, 4))
    assert second_adversarial_loss(const(0.5), z, z, "discriminator").item() == pytest.approx(0.5)
    assert second_adversarial_loss(const(1.0), z, z, "generator").item() == 0.0
    with pytest.raises(RuntimeError):
        second_adversarial_loss(const(1.0), z, z, "generator", enabled=False)
    with pytest.raises(RuntimeError):
        second_adversarial_loss(None, z, z, "generator")


def test_cycle_examples():
    x, xc = np.ones(2), np.zeros(2)
    y = np.zeros(3)
    assert cycle_loss(x, xc, y, y, "L1").item() == pytest.approx(1.0)
    assert cycle_loss(x, xc, y, y, "L2").item() == pytest.approx(1.0)
    assert cycle_loss(x, x, y, y, "L1").item() == 0.0
    with pytest.raises(ValueError):
        cycle_loss(x, np.zeros(3), y, y)
    with pytest.raises(ValueError):
        cycle_loss(x, xc, y, y, "L3")


@given(
    arrays(np.float64, (2, 5), elements=st.floats(-4, 4)),
    arrays(np.float64, (2, 5), elements=st.floats(-4, 4)),
)
def test_cycle_homogeneity(x, y):
    r = np.linspace(-1, 1, 10).reshape(2, 5)
    l1 = cycle_loss(x, x + r, y, y + r, "L1").item()
    l2 = cycle_loss(x, x + r, y, y + r, "L2").item()
    assert cycle_loss(x, x + 2 * r, y, y + 2 * r, "L1").item() == pytest.approx(2 * l1)
    assert cycle_loss(x, x + 2 * r, y, y + 2 * r, "L2").item() == pytest.approx(4 * l2)
    assert cycle_loss(x, x, y, y, "L2").item() == 0.0


def test_identity_examples():
    y = np.zeros((1, 2, 4))
    assert identity_loss(y, y, y, y).item() == 0.0
    assert identity_loss(y, y, y, y + 0.5).item() == pytest.approx(0.5)


def test_total_loss_examples():
    cfg = GanConfig()
    assert total_loss({}, cfg, 0) == 0.0
    assert total_loss({"cycle": 1.0}, cfg, 0) == 10.0
    assert total_loss({"identity": 1.0}, cfg, 0) == 5.0
    assert total_loss({"identity": 1.0}, cfg, 10_000) == 0.0
    assert total_loss({"gan2": 1.0}, cfg, 0) == 0.0
    assert total_loss({"gan2": 1.0}, cfg.replace(two_step=True), 0) == 1.0


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.integers(0, 20000))
def test_total_loss_without_weights_is_adversarial_sum(a, b, c, d, it):
    cfg = GanConfig(lambda_cycle=0.0, lambda_id=0.0)
    assert total_loss({"gan_g": a, "gan_f": b, "cycle": c, "identity": d}, cfg, it) == a + b


@given(st.floats(1, 1e3), st.integers(0, 10**6))
def test_identity_cutoff_scales(scale, it):
    cfg = GanConfig(scale=scale)
    assert identity_active(cfg, it) == (it < 1e4 / scale)


@pytest.mark.parametrize("name", LOSSES)
def test_loss_gradients(name):
    for seed in range(3):
        assert gradient_error(name, seed) <= 1e-4


# --- segments and FIF -----------------------------------------------------------


def test_segment_whole_utterance(rng):
    f = rng.normal(size=(128, 3))
    seg, start = sample_segment(f, 128, rng)
    assert start == 0 and np.array_equal(seg, f)


def test_segment_start_uniform():
    rng = np.random.default_rng(0)
    f = np.zeros((200, 1))
    starts = [sample_segment(f, 128, rng)[1] for _ in range(10_000)]
    counts = np.bincount(starts, minlength=73)
    assert counts.size == 73
    assert chisquare(counts).pvalue > 0.01


def test_segment_reflect_pad(rng):
    f = np.arange(50.0)[:, None]
    seg, _ = sample_segment(f, 128, rng)
    assert seg.shape == (128, 1)
    np.testing.assert_array_equal(seg[:50, 0], np.arange(50.0))
    np.testing.assert_array_equal(seg[50:53, 0], [48.0, 47.0, 46.0])


def test_segment_errors(rng):
    with pytest.raises(ValueError):
        sample_segment(np.zeros((0, 2)), 4, rng)
    with pytest.raises(ValueError):
        sample_segment(np.zeros((5, 2)), 0, rng)


def test_fif_examples(rng):
    seg = rng.normal(size=(64, 4)) + 5
    out, m = fif_mask(seg, rng, width=0)
    assert np.array_equal(out, seg) and np.all(m.values == 1)
    out, m = fif_mask(seg, rng, width=32, start=0)
    assert np.all(out[:32] == 0) and np.array_equal(out[32:], seg[32:])


@given(st.integers(2, 130), st.integers(0, 2**32 - 1))
def test_fif_mask_consistency(n, seed):
    rng = np.random.default_rng(seed)
    seg = rng.normal(size=(n, 3)) + 10
    out, m = fif_mask(seg, rng)
    zeros = np.flatnonzero(m.values == 0)
    assert m.width <= n // 2
    assert np.array_equal(zeros, np.arange(m.start, m.start + m.width))
    assert np.all(out[m.values == 0] == 0)
    assert np.array_equal(out[m.values == 1], seg[m.values == 1])


def test_fif_mean_fraction():
    rng = np.random.default_rng(0)
    seg = np.ones((64, 1))
    fracs = [fif_mask(seg, rng)[1].masked_fraction for _ in range(10_000)]
    assert abs(np.mean(fracs) - expected_masked_fraction(64)) <= 0.01
    assert expected_masked_fraction(64) == 0.25


# --- config registry ------------------------------------------------------------


def test_registry_has_six_distinct_variants():
    cfgs = list(BASE_VARIANTS.values())
    assert len(cfgs) == 6 and len({c.to_dict().__repr__() for c in cfgs}) == 6
    assert len(variant_names()) == 12


def test_named_variant_switches():
    mask = get_variant("MaskCycleGAN-VC")
    assert mask.two_step and mask.fif_da and mask.segment_len == 64 and mask.epochs == 300
    disco = get_variant("DiscoGAN")
    assert disco.cycle_norm == "L2" and disco.use_dtw and not disco.two_step
    base = get_variant("CycleGAN-VC")
    assert (base.lambda_cycle, base.lambda_id, base.id_zero_after, base.segment_len) == (10.0, 5.0, 1e4, 128)
    assert get_variant("CycleGAN-VC + DTW + 2-STEP + TS").ts_input
    with pytest.raises(KeyError):
        get_variant("StarGAN")


def test_ts_variants_share_training_key():
    for name in BASE_VARIANTS:
        assert get_variant(name + " + TS").training_key() == get_variant(name).training_key()


@pytest.mark.parametrize("bad", [dict(cycle_norm="L3"), dict(segment_len=0), dict(lambda_id=-1.0), dict(batch_size=2), dict(norm="batch"), dict(scale=0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        GanConfig(**bad)


def test_config_dict_round_trip(tmp_path):
    import json

    cfg = get_variant("MaskCycleGAN-VC", **DESK_OVERRIDES)
    (tmp_path / "c.json").write_text(json.dumps(cfg.to_dict()))
    assert GanConfig.from_file(tmp_path / "c.json") == cfg
    with pytest.raises(KeyError):
        GanConfig.from_dict({"lambda_gp": 1})


# --- models, training and conversion ----------------------------------------------


def small_cfg(**kw):
    base = dict(n_mels=8, gen_channels=8, disc_channels=8, segment_len=16, n_iters=12, norm="none")
    base.update(kw)
    return GanConfig(**base)


def toy_corpora(rng, n=3):
    src = [rng.normal(-1, 0.3, size=(int(rng.integers(20, 40)), 8)) for _ in range(n)]
    tgt = [rng.normal(1, 0.3, size=(int(rng.integers(20, 40)), 8)) for _ in range(n)]
    return src, tgt


def test_second_discriminators_follow_two_step(rng):
    assert ModelPair.build(small_cfg(), rng).D2_X is None
    m = ModelPair.build(small_cfg(two_step=True), rng)
    assert m.D2_X is not None and m.D2_Y is not None
    shapes = lambda mod: [p.shape for p in mod.parameters()]
    assert shapes(m.G) == shapes(m.F)


def test_training_curves_and_gating(rng):
    src, tgt = toy_corpora(rng)
    res = train(small_cfg(), src, tgt)
    names = {n for _, n, _ in res.curves}
    assert "g_adv2" not in names and "d_adv2" not in names
    assert res.iterations == 12 and len(res.series("g_total")) == 12
    res2 = train(small_cfg(two_step=True, fif_da=True), src, tgt)
    assert {"g_adv2", "d_adv2"} <= {n for _, n, _ in res2.curves}


def test_identity_curve_zero_after_cutoff(rng):
    src, tgt = toy_corpora(rng)
    cfg = small_cfg(n_iters=10, scale=2000.0)  # cut-off at iteration 5
    ident = train(cfg, src, tgt).series("identity")
    assert np.all(ident[:5] > 0) and np.all(ident[5:] == 0.0)


def test_scaled_schedule_logged(rng):
    src, tgt = toy_corpora(rng)
    cfg = small_cfg(n_iters=10, schedule=LrSchedule(decay_start=4, decay_len=4))
    res = train(cfg, src, tgt)
    np.testing.assert_allclose(res.series("lr_g"), [2e-4] * 4 + [2e-4, 1.5e-4, 1e-4, 0.5e-4, 0, 0])


def test_training_is_deterministic(rng, tmp_path):
    src, tgt = toy_corpora(rng)
    a = train(small_cfg(), src, tgt, out_dir=tmp_path / "a")
    b = train(small_cfg(), src, tgt, out_dir=tmp_path / "b")
    assert a.curves == b.curves
    assert file_sha256(a.checkpoint) == file_sha256(b.checkpoint)


def test_checkpoints_and_curves_on_disk(rng, tmp_path):
    src, tgt = toy_corpora(rng)
    res = train(small_cfg(checkpoint_every=5), src, tgt, out_dir=tmp_path)
    ck = sorted(p.name for p in (tmp_path / "checkpoints").glob("*.bin"))
    assert ck == ["final.bin", "iter_0000005.bin", "iter_0000010.bin"]
    assert read_curves(tmp_path / "curves.csv") == [(i, n, pytest.approx(v)) for i, n, v in res.curves]
    models, cfg = load_models(res.checkpoint)
    assert cfg == small_cfg(checkpoint_every=5)
    np.testing.assert_array_equal(models.G.conv_out.weight.data, res.models.G.conv_out.weight.data)


def test_dtw_training_needs_pairs(rng):
    src, tgt = toy_corpora(rng)
    res = train(small_cfg(use_dtw=True), src, tgt, pairs=[(0, 0), (1, 1)])
    assert res.iterations == 12
    with pytest.raises(ValueError):
        train(small_cfg(use_dtw=True), src, tgt[:2])


def test_empty_corpus_raises():
    with pytest.raises(ValueError):
        train(small_cfg(), [], [np.zeros((20, 8))])
    with pytest.raises(ValueError):
        train(small_cfg(), [np.zeros((20, 5))], [np.zeros((20, 8))])


def test_nan_aborts_with_last_good_checkpoint(rng, tmp_path, monkeypatch):
    src, tgt = toy_corpora(rng)
    real = train_mod.cycle_loss
    calls = {"n": 0}

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 4:
            raise FloatingPointError("injected")
        return real(*args, **kw)

    monkeypatch.setattr(train_mod, "cycle_loss", flaky)
    with pytest.raises(TrainingAborted) as info:
        train(small_cfg(), src, tgt, out_dir=tmp_path)
    assert info.value.checkpoint is not None and info.value.checkpoint.name == "last_good.bin"
    assert "iteration 3" in str(info.value)


def test_identity_generator_preserves_features(rng):
    models = ModelPair.build(small_cfg(), rng)
    models.G.make_identity()
    feats = rng.normal(size=(15, 8))
    out = convert_features(models, feats, "x2y")
    assert np.mean(np.abs(out - feats)) < 1e-3


def test_convert_stretch_rate_and_f0(rng, caplog):
    cfg = small_cfg(n_mels=40, ts_input=True, griffin_lim_iters=2)
    models = ModelPair.build(cfg, rng)
    utt = sine(200, 2.0)
    conv = convert(models, utt, cfg, target_duration=1.0, report_f0=True,
                   src_stats=F0Stats(np.log(200), 0.1), tgt_stats=F0Stats(np.log(400), 0.1))
    assert conv.stretch_rate == pytest.approx(2.0)
    assert abs(len(conv.waveform) - SR) <= 256
    voiced = conv.f0.values[conv.f0.voiced]
    assert abs(np.median(voiced) - 400) < 10
    with caplog.at_level(logging.WARNING):
        conv = convert(models, utt, cfg, report_f0=True)
    assert conv.stretch_rate == 1.0 and conv.f0 is None
    assert "no target duration" in caplog.text and "F0 statistics missing" in caplog.text


def test_convert_rejects_bad_input(rng):
    cfg = small_cfg(n_mels=40)
    models = ModelPair.build(cfg, rng)
    with pytest.raises(ValueError):
        convert_features(models, np.zeros((4, 40)), "sideways")
    from dysvc.dsp import Waveform

    with pytest.raises(ValueError):
        convert(models, Waveform(np.zeros(0), SR), cfg)
