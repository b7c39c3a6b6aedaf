import logging

import numpy as np
import pytest
from conftest import SR, sine
from hypothesis import given
from hypothesis import strategies as st
from oracles import band_levels, denoise_fixture

from dysvc.dsp import Waveform, get_window, stft
from dysvc.preprocess import (
    TRIM_HOP,
    GateParams,
    NoiseProfile,
    estimate_noise_profile,
    preprocess_pipeline,
    remove_clicks,
    spectral_gate,
    trim_bounds,
    trim_silence,
)


def rms_db(x):
    return 10 * np.log10(np.mean(x**2))


def test_zero_waveform_profile():
    p = estimate_noise_profile(Waveform(np.zeros(SR), SR))
    assert p.mean_mag.shape == (513,)
    assert not np.any(p.mean_mag) and not np.any(p.std_mag)


def test_profile_uses_exactly_the_head(rng):
    x = rng.normal(size=SR)
    a = estimate_noise_profile(Waveform(x, SR))
    y = x.copy()
    y[8000:] = 100.0
    b = estimate_noise_profile(Waveform(y, SR))
    np.testing.assert_array_equal(a.mean_mag, b.mean_mag)
    np.testing.assert_array_equal(a.mean_mag, estimate_noise_profile(Waveform(x[:8000], SR), head_s=1.0).mean_mag)


def test_short_signal_profiles_everything(rng, caplog):
    with caplog.at_level(logging.WARNING):
        p = estimate_noise_profile(Waveform(rng.normal(size=4000), SR))
    assert "shorter than noise head" in caplog.text
    assert p.n_frames == 1 + 4000 // 256


def test_noise_profile_close_to_population():
    rng = np.random.default_rng(7)
    head = estimate_noise_profile(Waveform(rng.normal(size=SR // 2), SR))
    win = get_window("hann", 1024)
    # |X_k| of unit white noise is Rayleigh with E|X_k|^2 = sum(w^2)
    population = np.sqrt(np.pi * np.sum(win**2) / 4)
    interior = head.mean_mag[5:508]
    assert abs(interior.mean() / population - 1) < 0.1
    assert np.median(np.abs(interior / population - 1)) < 0.1


def test_zero_profile_passes_signal():
    w = sine(500, 0.5)
    zero = NoiseProfile(np.zeros(513), np.zeros(513), 0, SR)
    out = spectral_gate(w, zero)
    np.testing.assert_allclose(out.samples, w.samples, atol=1e-10)


def test_gate_rejects_sample_rate_mismatch():
    p = estimate_noise_profile(Waveform(np.zeros(SR), SR))
    with pytest.raises(ValueError):
        spectral_gate(Waveform(np.zeros(100), 8000), p)


def test_denoise_fixture():
    x = denoise_fixture(seed=0)
    w = Waveform(x, SR)
    out = spectral_gate(w, estimate_noise_profile(w)).samples
    assert len(out) == len(x)
    floor_in, tone_in = band_levels(x)
    floor_out, tone_out = band_levels(out)
    assert floor_in - floor_out >= 15
    assert abs(tone_out - tone_in) < 1


def test_pure_noise_is_attenuated():
    w = Waveform(np.random.default_rng(3).normal(size=2 * SR) * 0.05, SR)
    g = GateParams()
    out = spectral_gate(w, estimate_noise_profile(w), g)
    assert rms_db(w.samples) - rms_db(out.samples) >= g.attenuation_db - 6


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.8), st.floats(100, 3000))
def test_gate_does_not_add_energy(seed, tone_amp, freq):
    rng = np.random.default_rng(seed)
    x = 0.02 * rng.normal(size=SR)
    x[SR // 2 :] += tone_amp * np.sin(2 * np.pi * freq * np.arange(SR // 2) / SR)
    w = Waveform(x, SR)
    out = spectral_gate(w, estimate_noise_profile(w))
    assert np.sum(out.samples**2) <= 1.01 * np.sum(x**2)


def test_trim_tone_with_silent_padding():
    tone = sine(440, 0.5).samples
    x = np.concatenate([np.zeros(int(0.3 * SR)), tone, np.zeros(int(0.3 * SR))])
    out = trim_silence(Waveform(x, SR))
    assert abs(len(out) - len(tone)) <= 2048


def test_trim_constant_tone_is_identity():
    w = Waveform(0.5 * np.ones(SR), SR)
    assert np.array_equal(trim_silence(w).samples, w.samples)


def test_trim_all_zeros(caplog):
    with caplog.at_level(logging.WARNING):
        out = trim_silence(Waveform(np.zeros(SR), SR))
    assert len(out) == 0 and "silent" in caplog.text


@given(st.integers(0, 2**32 - 1), st.integers(1, 20000), st.floats(5, 60))
def test_trim_is_contiguous_slice(seed, n, top_db):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n) * np.exp(-np.linspace(0, rng.uniform(0, 12), n))
    w = Waveform(x, SR)
    start, stop = trim_bounds(w, top_db)
    out = trim_silence(w, top_db)
    assert 0 <= start <= stop <= n
    assert start % TRIM_HOP == 0
    assert np.array_equal(out.samples, x[start:stop])


def test_click_margins():
    assert len(remove_clicks(Waveform(np.zeros(SR), SR))) == int(0.6 * SR)
    w = Waveform(np.arange(10.0), 10)
    assert np.array_equal(remove_clicks(w, 0.2).samples, np.arange(2.0, 8.0))
    assert remove_clicks(w, 0.0) is w


def test_short_signal_keeps_clicks(caplog):
    w = Waveform(np.ones(int(0.3 * SR)), SR)
    with caplog.at_level(logging.WARNING):
        out = remove_clicks(w)
    assert np.array_equal(out.samples, w.samples) and "click margin" in caplog.text


@given(st.integers(0, 20000), st.floats(0.0, 0.5))
def test_click_length_contract(n, margin_s):
    w = Waveform(np.ones(n), SR)
    m = int(round(margin_s * SR))
    out = remove_clicks(w, margin_s)
    expect = n if (m == 0 or n <= 2 * m) else n - 2 * m
    assert len(out) == expect
    if n > 2 * m:
        assert len(out) == max(0, n - 2 * m)


def test_pipeline_on_padded_tone():
    rng = np.random.default_rng(5)
    sil = lambda s: 0.001 * rng.normal(size=int(s * SR))
    tone = sine(440, 0.6).samples
    x = np.concatenate([sil(0.9), tone, sil(0.6)])
    report = {}
    out = preprocess_pipeline(Waveform(x, SR), report=report)
    assert report["click_samples_each_end"] == int(0.2 * SR)
    assert abs(len(out) - len(tone)) <= 2 * 2048
    mag_in = np.abs(stft(Waveform(tone, SR)).frames).max()
    mag_out = np.abs(stft(out).frames).max()
    assert abs(20 * np.log10(mag_out / mag_in)) < 1


def test_pipeline_empty_after_trim(caplog):
    with caplog.at_level(logging.WARNING):
        out = preprocess_pipeline(Waveform(np.zeros(SR), SR))
    assert len(out) == 0


def test_pipeline_idempotent_up_to_one_frame():
    rng = np.random.default_rng(9)
    x = np.concatenate([0.003 * rng.normal(size=int(0.9 * SR)), sine(330, 0.7).samples, 0.003 * rng.normal(size=int(0.5 * SR))])
    once = preprocess_pipeline(Waveform(x, SR), click_margin_s=0.0)
    twice = preprocess_pipeline(once, click_margin_s=0.0, noise_head_s=0.05)
    assert abs(len(once) - len(twice)) <= 2048


def test_gate_params_validation():
    with pytest.raises(ValueError):
        GateParams(n_std_thresh=0)
    with pytest.raises(ValueError):
        GateParams(attenuation_db=-1)
