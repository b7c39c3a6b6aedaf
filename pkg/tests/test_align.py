import numpy as np
import pytest
from conftest import SR
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from oracles import delannoy, dtw_oracle, monotonic_paths

from dysvc.align import WarpPath, apply_warp, dtw, frame_distances, stretch_rate_for_target
from dysvc.dsp import Waveform, time_stretch


def sequences(max_len=6, max_dim=3, elements=st.floats(-5, 5, allow_nan=False)):
    return st.integers(1, max_dim).flatmap(
        lambda d: st.tuples(
            arrays(np.float64, st.tuples(st.integers(1, max_len), st.just(d)), elements=elements),
            arrays(np.float64, st.tuples(st.integers(1, max_len), st.just(d)), elements=elements),
        )
    )


def valid_path(p: WarpPath, n, m):
    s = p.steps
    assert s[0] == (0, 0) and s[-1] == (n - 1, m - 1)
    for (i0, j0), (i1, j1) in zip(s, s[1:]):
        assert (i1 - i0, j1 - j0) in {(1, 0), (0, 1), (1, 1)}


def test_oracle_enumerates_every_path():
    for n in range(1, 5):
        for m in range(1, 5):
            assert len(monotonic_paths(n, m)) == delannoy(n - 1, m - 1)


def test_identical_sequences_align_diagonally(rng):
    X = rng.normal(size=(5, 2))
    p = dtw(X, X)
    assert p.cost == 0.0
    assert p.steps == tuple((i, i) for i in range(5))


def test_worked_example():
    p = dtw([0, 1, 2], [0, 0, 1, 2])
    assert p.cost == 0.0
    assert p.steps == ((0, 0), (0, 1), (1, 2), (2, 3))
    np.testing.assert_array_equal(apply_warp([0.0, 1.0, 2.0], p), [0.0, 0.0, 1.0, 2.0])


def test_errors():
    with pytest.raises(ValueError):
        dtw(np.zeros((0, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        dtw(np.zeros((2, 2)), np.zeros((3, 3)))
    p = dtw([0, 1], [0, 1, 2])
    with pytest.raises(ValueError):
        apply_warp(np.zeros(5), p)
    with pytest.raises(ValueError):
        apply_warp(np.zeros(2), p, axis="sideways")


@given(sequences())
def test_matches_exhaustive_oracle(pair):
    X, Y = pair
    p = dtw(X, Y)
    cost, path = dtw_oracle(X, Y)
    assert p.cost == cost
    assert p.steps == path


@given(sequences(elements=st.integers(-2, 2).map(float), max_dim=1))
def test_tie_breaking_matches_oracle(pair):
    # small integers make equal-cost paths common and their sums exact
    X, Y = pair
    p = dtw(X, Y)
    cost, path = dtw_oracle(X, Y)
    assert p.cost == cost and p.steps == path


@given(sequences(max_len=12))
def test_path_is_valid_and_cost_consistent(pair):
    X, Y = pair
    p = dtw(X, Y)
    valid_path(p, len(X), len(Y))
    d = frame_distances(X, Y)
    assert p.cost == pytest.approx(sum(d[i, j] for i, j in p.steps), rel=1e-12, abs=1e-12)


@given(sequences(max_len=12))
def test_cost_symmetry(pair):
    X, Y = pair
    assert dtw(X, Y).cost == dtw(Y, X).cost


@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 3)), elements=st.floats(-5, 5)))
def test_self_cost_is_zero(X):
    assert dtw(X, X).cost == 0.0


@given(sequences(max_len=10))
def test_duplicate_final_frame_keeps_cost(pair):
    X, Y = pair
    Y = np.vstack([Y, X[-1:]])  # both now end on the same frame
    base = dtw(X, Y).cost
    assert dtw(np.vstack([X, X[-1:]]), np.vstack([Y, Y[-1:]])).cost == pytest.approx(base, abs=1e-12)


@given(sequences(max_len=10))
def test_duplicate_distinct_final_frames_bounds(pair):
    X, Y = pair
    base = dtw(X, Y).cost
    last = frame_distances(X[-1:], Y[-1:])[0, 0]
    new = dtw(np.vstack([X, X[-1:]]), np.vstack([Y, Y[-1:]])).cost
    assert base - 1e-12 <= new <= base + last + 1e-12


@given(sequences(max_len=10))
def test_warp_output_length(pair):
    X, Y = pair
    p = dtw(X, Y)
    assert apply_warp(X, p).shape == Y.shape
    assert apply_warp(Y, p, axis="target").shape == X.shape


def test_warp_averages_merged_frames():
    p = WarpPath(((0, 0), (1, 0), (2, 1)), 0.0)
    np.testing.assert_array_equal(apply_warp([[2.0], [4.0], [5.0]], p), [[3.0], [5.0]])


def test_diagonal_warp_is_identity(rng):
    X = rng.normal(size=(4, 3))
    p = WarpPath(tuple((i, i) for i in range(4)), 0.0)
    np.testing.assert_array_equal(apply_warp(X, p), X)


def test_stretch_rate_examples():
    assert stretch_rate_for_target(2.0, 1.0) == 2.0
    assert stretch_rate_for_target(1.3, 1.3) == 1.0
    with pytest.raises(ValueError):
        stretch_rate_for_target(0.0, 1.0)


@settings(max_examples=50)
@given(st.floats(0.3, 2.5), st.floats(0.3, 2.5), st.integers(0, 2**32 - 1))
def test_rate_composed_with_stretch_hits_target(src_s, tgt_s, seed):
    x = np.random.default_rng(seed).normal(size=int(src_s * SR))
    rate = stretch_rate_for_target(len(x) / SR, tgt_s)
    out = time_stretch(Waveform(x, SR), rate)
    assert abs(len(out) - tgt_s * SR) <= 256
