import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dysvc.nn import (
    Adam,
    AdamState,
    Conv1d,
    LrSchedule,
    NonFiniteGradientError,
    Tape,
    Tensor,
    adam_step,
    backward,
    check_gradients,
    config_hash,
    load_checkpoint,
    lr_at,
    parameter,
    save_checkpoint,
)
from dysvc.nn import tensor as T

finite = st.floats(-3, 3, allow_nan=False, width=64)


def grads_of(fn, *values):
    params = [parameter(np.asarray(v, dtype=np.float64)) for v in values]
    with Tape() as tape:
        loss = fn(*params)
    tape.backward(loss)
    return [p.grad for p in params]


def test_glu_with_zero_gate_halves():
    a = Tensor(np.array([[1.0, -2.0, 4.0]]))
    out = T.gated_linear_unit(a, Tensor(np.zeros((1, 3))))
    np.testing.assert_allclose(out.data, a.data / 2)


def test_identity_kernel_conv_is_identity(rng):
    x = Tensor(rng.normal(size=(2, 3, 7)))
    w = np.zeros((3, 3, 3))
    for c in range(3):
        w[c, c, 1] = 1.0
    out = T.conv1d(x, Tensor(w), padding=1)
    np.testing.assert_array_equal(out.data, x.data)


def test_l1_of_equal_inputs_is_zero(rng):
    x = rng.normal(size=(4, 5))
    assert T.l1(x, x.copy()).item() == 0.0


def test_sum_of_squares_gradient():
    (g,) = grads_of(lambda x: T.sum_(T.square(x)), [1.0, 2.0])
    np.testing.assert_array_equal(g, [2.0, 4.0])


def test_constant_loss_gives_zero_gradient():
    x = parameter(np.array([1.0, 2.0]))
    with Tape() as tape:
        loss = T.add(T.mul(T.sum_(x), 0.0), 3.0)
    tape.backward(loss)
    np.testing.assert_array_equal(x.grad, 0.0)


def test_backward_without_forward_raises():
    with pytest.raises(RuntimeError):
        backward(Tensor(np.array(1.0)))


def test_tape_is_single_use():
    x = parameter(np.array([1.0]))
    with Tape() as tape:
        loss = T.sum_(T.square(x))
    tape.backward(loss)
    with pytest.raises(RuntimeError):
        tape.backward(loss)


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_non_finite_forward_raises():
    with pytest.raises(FloatingPointError):
        T.mul(Tensor(np.array([1e308])), 1e10)


def test_shape_mismatch_is_reported():
    with pytest.raises(ValueError):
        T.l1(np.zeros(3), np.zeros(4))


@pytest.mark.parametrize(
    "name, fn, shapes",
    [
        ("conv1d_stride2", lambda x, w, b: T.sum_(T.square(T.conv1d(x, w, b, stride=2, padding=2))), [(2, 3, 9), (4, 3, 5), (4,)]),
        ("glu", lambda x: T.mean(T.square(T.glu(x, axis=1))), [(2, 4, 5)]),
        ("instance_norm", lambda x, w: T.sum_(T.mul(T.instance_norm(x), w)), [(2, 3, 6), (2, 3, 6)]),
        ("leaky_relu", lambda x: T.sum_(T.square(T.leaky_relu(x))), [(3, 4)]),
        ("upsample_pad", lambda x: T.sum_(T.square(T.pad(T.upsample(x, 2), 3, 2, mode="reflect"))), [(1, 2, 4)]),
        ("matmul", lambda a, b: T.sum_(T.square(T.matmul(a, b))), [(3, 4), (4, 2)]),
        ("concat_slice", lambda a, b: T.sum_(T.square(T.slice_(T.concat([a, b], axis=1), (slice(None), slice(1, 5))))), [(2, 3), (2, 4)]),
        ("l2_sigmoid", lambda a, b: T.l2(T.sigmoid(a), b), [(3, 3), (3, 3)]),
    ],
)
def test_primitive_gradients(name, fn, shapes, rng):
    params = [parameter(rng.normal(size=s)) for s in shapes]
    err = check_gradients(lambda: fn(*params), params, h=1e-6)
    assert err < 1e-6, name


@given(arrays(np.float64, (5,), elements=finite))
def test_broadcast_add_gradient_is_summed(x):
    gx, gb = grads_of(lambda a, b: T.sum_(T.add(a, b)), x.reshape(1, 5).repeat(3, axis=0), np.zeros(5))
    np.testing.assert_array_equal(gx, np.ones((3, 5)))
    np.testing.assert_array_equal(gb, np.full(5, 3.0))


def test_forward_is_deterministic(rng):
    w = rng.normal(size=(4, 3, 5))
    x = rng.normal(size=(1, 3, 11))
    a = T.conv1d(Tensor(x), Tensor(w), padding=2).data
    b = T.conv1d(Tensor(x), Tensor(w), padding=2).data
    np.testing.assert_array_equal(a, b)


def test_conv_layer_shapes(rng):
    conv = Conv1d(3, 8, 5, rng, stride=2, padding=2)
    out = conv(Tensor(np.zeros((1, 3, 16), dtype=np.float32)))
    assert out.shape == (1, 8, 8)


# --- Adam -------------------------------------------------------------------


def test_adam_zero_gradient_keeps_params():
    p = [np.array([1.0, -2.0])]
    state = AdamState()
    adam_step(p, [np.zeros(2)], state, 1e-3)
    np.testing.assert_array_equal(p[0], [1.0, -2.0])
    assert state.step == 1


def test_adam_unit_gradient_first_step_moves_by_lr():
    p = [np.array([0.5])]
    adam_step(p, [np.array([1.0])], AdamState(), 1e-3)
    np.testing.assert_allclose(p[0], [0.5 - 1e-3], rtol=0, atol=1e-10)


def test_adam_rejects_non_finite_gradient():
    with pytest.raises(NonFiniteGradientError):
        adam_step([np.zeros(1)], [np.array([np.nan])], AdamState(), 1e-3)


@given(st.lists(arrays(np.float64, (3,), elements=finite), min_size=1, max_size=8))
def test_adam_identical_params_update_identically(grads):
    a, b = [np.ones(3)], [np.ones(3)]
    sa, sb = AdamState(), AdamState()
    for g in grads:
        adam_step(a, [g], sa, 2e-4)
        adam_step(b, [g.copy()], sb, 2e-4)
    np.testing.assert_array_equal(a[0], b[0])


@given(st.floats(1e-3, 1e3), st.integers(1, 30), st.sampled_from([-1.0, 1.0]))
def test_adam_constant_gradient_step_bounded_by_lr(mag, steps, sign):
    lr = 2e-4
    p = [np.zeros(1)]
    state = AdamState()
    for _ in range(steps):
        before = p[0].copy()
        adam_step(p, [np.array([sign * mag])], state, lr)
        assert abs(p[0][0] - before[0]) <= lr * (1 + 1e-9)


def adam_step_bound(lr, beta1, beta2, t):
    # Cauchy-Schwarz on the two moment sums
    r = beta1**2 / beta2
    return lr * (1 - beta1) / np.sqrt(1 - beta2) * np.sqrt(1 - beta2**t) / (1 - beta1**t) / np.sqrt(1 - r)


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=40))
def test_adam_step_within_moment_bound(seq):
    lr = 1.0
    p = [np.zeros(1)]
    state = AdamState()
    for t, g in enumerate(seq, start=1):
        before = p[0][0]
        adam_step(p, [np.array([g])], state, lr)
        assert abs(p[0][0] - before) <= adam_step_bound(lr, 0.5, 0.999, t) * (1 + 1e-9)


def test_adam_sparse_gradient_exceeds_lr():
    # a gradient after a long quiet stretch moves a coordinate by far more than lr
    lr = 1e-3
    p = [np.zeros(1)]
    state = AdamState()
    for _ in range(2000):
        adam_step(p, [np.zeros(1)], state, lr)
    adam_step(p, [np.array([1.0])], state, lr)
    assert abs(p[0][0]) > 10 * lr


def test_adam_optimises_quadratic():
    x = parameter(np.array([3.0, -2.0]))
    opt = Adam([x], 0.9, 0.999)
    for _ in range(500):
        opt.zero_grad()
        with Tape() as tape:
            loss = T.sum_(T.square(x))
        tape.backward(loss)
        opt.step(0.05)
    assert np.all(np.abs(x.data) < 0.05)


# --- schedule ---------------------------------------------------------------


@given(st.integers(0, 600_000))
def test_lr_schedule_bounds(it):
    s = LrSchedule()
    g = lr_at(s, it, "generator")
    d = lr_at(s, it, "discriminator")
    assert 0.0 <= g <= 2e-4 and 0.0 <= d <= 1e-4
    if it >= 400_000:
        assert g == d == 0.0


@given(st.integers(0, 399_999), st.integers(1, 1000))
def test_lr_schedule_non_increasing(it, step):
    s = LrSchedule()
    assert lr_at(s, it + step) <= lr_at(s, it)


def test_lr_schedule_rejects_negative_iteration():
    with pytest.raises(ValueError):
        lr_at(LrSchedule(), -1)


# --- checkpoints ---------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path, rng):
    state = {"a.w": rng.normal(size=(2, 3)).astype(np.float32), "b": np.arange(4, dtype=np.float32)}
    save_checkpoint(tmp_path / "ck", state, 7, {"x": 1})
    loaded, meta = load_checkpoint(tmp_path / "ck")
    assert list(loaded) == ["a.w", "b"]
    for k in state:
        np.testing.assert_array_equal(loaded[k], state[k])
    assert meta["iteration"] == 7
    assert meta["config_hash"] == config_hash({"x": 1})


def test_checkpoint_bytes_are_deterministic(tmp_path, rng):
    state = {"w": rng.normal(size=(5,)).astype(np.float32)}
    save_checkpoint(tmp_path / "a", state, 1, {"k": [1, 2]})
    save_checkpoint(tmp_path / "b", state, 1, {"k": [1, 2]})
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    assert (tmp_path / "a.json").read_text() == (tmp_path / "b.json").read_text()
