import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffqaoa.ddpm import (
    PARAM_NAMES,
    NoisePredictor,
    TrainConfig,
    build_schedule,
    checkpoint_bytes,
    forward_diffuse,
    load_checkpoint,
    noise_prediction_loss,
    predict_noise,
    reverse_step,
    sample,
    save_checkpoint,
    train,
    zero_model_sample_variance,
)
from diffqaoa.errors import ParameterError, ParseError, VersionError


@pytest.fixture(scope="module")
def schedule():
    return build_schedule(100)


def test_schedule_endpoints(schedule):
    assert schedule.beta[0] == pytest.approx(1e-4, abs=1e-15)
    assert schedule.beta[99] == pytest.approx(0.02, abs=1e-15)
    assert schedule.beta[49] == pytest.approx(1e-4 + 49 * (0.02 - 1e-4) / 99, abs=1e-15)
    assert schedule.beta[49] == pytest.approx(0.0100, abs=1e-4)


def test_alpha_bar_matches_left_fold(schedule):
    acc = 1.0
    for b in schedule.beta:
        acc = acc * (1.0 - b)
    assert abs(schedule.alpha_bar[-1] - acc) < 1e-12


@given(st.integers(2, 400))
def test_schedule_invariants(T):
    s = build_schedule(T)
    assert np.all(np.diff(s.alpha_bar) < 0)
    assert s.alpha_bar[-1] < s.alpha_bar[0] < 1
    np.testing.assert_allclose(s.alpha_bar[1:], s.alpha[1:] * s.alpha_bar[:-1], rtol=0, atol=1e-12)
    np.testing.assert_allclose(s.sigma, np.sqrt(s.beta))


def test_schedule_rejects_short():
    with pytest.raises(ParameterError):
        build_schedule(1)


def test_forward_diffuse_examples(schedule):
    x0 = np.array([0.1, -0.2, 0.3, 0.4, -0.5, 0.6])
    for t in (1, 50, 100):
        np.testing.assert_array_equal(
            forward_diffuse(x0, t, schedule, np.zeros(6)), math.sqrt(schedule.alpha_bar[t - 1]) * x0
        )
    e1 = np.eye(6)[0]
    np.testing.assert_allclose(
        forward_diffuse(np.zeros(6), 100, schedule, e1), math.sqrt(1 - schedule.alpha_bar[-1]) * e1
    )
    with pytest.raises(ParameterError):
        forward_diffuse(x0, 0, schedule, np.zeros(6))
    with pytest.raises(ParameterError):
        forward_diffuse(x0, 101, schedule, np.zeros(6))


def test_forward_diffuse_variance(schedule):
    rng = np.random.default_rng(0)
    x0 = np.array([0.5, -0.5, 0.2, 0.0, 0.9, -0.9])
    noise = rng.standard_normal((10000, 6))
    xt = forward_diffuse(np.broadcast_to(x0, (10000, 6)), np.full(10000, 50), schedule, noise)
    target = 1 - schedule.alpha_bar[49]
    assert np.all(np.abs(xt.var(axis=0) / target - 1) < 0.05)


def test_zero_model_outputs_zero():
    model = NoisePredictor.zeros()
    x = np.random.default_rng(1).standard_normal((5, 6))
    np.testing.assert_array_equal(predict_noise(model, x, np.arange(1, 6)), 0.0)


def test_predict_noise_is_deterministic():
    model = NoisePredictor.init(3)
    x = np.array([0.1, 0.2, -0.3, 0.4, 0.0, -0.1])
    a = predict_noise(model, x, 17)
    b = predict_noise(model, x, 17)
    assert a.shape == (6,)
    assert a.tobytes() == b.tobytes()
    with pytest.raises(ParameterError):
        predict_noise(model, x, 0)


def _finite_difference_check(model, x0, t, eps, schedule, h=1e-4):
    _, grads = noise_prediction_loss(model, x0, t, eps, schedule)
    worst = 0.0
    for name in PARAM_NAMES:
        w = model.params[name]
        fd = np.empty_like(w)
        flat, gflat = w.reshape(-1), fd.reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + h
            up, _ = noise_prediction_loss(model, x0, t, eps, schedule)
            flat[k] = old - h
            down, _ = noise_prediction_loss(model, x0, t, eps, schedule)
            flat[k] = old
            gflat[k] = (up - down) / (2 * h)
        err = np.linalg.norm(grads[name] - fd) / max(np.linalg.norm(fd), 1e-12)
        worst = max(worst, err)
        assert err < 1e-3, f"{name}: relative error {err:.2e}"
    return worst


def test_backprop_matches_finite_differences_small():
    schedule = build_schedule(10)
    rng = np.random.default_rng(4)
    model = NoisePredictor.init(5, hidden=16, num_steps=10)
    x0 = rng.uniform(-1, 1, (4, 6))
    t = rng.integers(1, 11, 4)
    eps = rng.standard_normal((4, 6))
    _finite_difference_check(model, x0, t, eps, schedule)


def test_single_vector_loss_decreases(schedule):
    v = np.array([0.3, -0.5, 0.7, 0.1, -0.2, 0.45])
    _, hist = train(np.tile(v, (50, 1)), schedule, TrainConfig(epochs=100, seed=2))
    assert hist[-1] < hist[0]
    assert all(math.isfinite(h) for h in hist)


def test_training_is_deterministic(schedule):
    data = np.random.default_rng(0).uniform(-1, 1, (120, 6))
    cfg = TrainConfig(epochs=3, seed=7)
    m1, h1 = train(data, schedule, cfg)
    m2, h2 = train(data, schedule, cfg)
    assert h1 == h2
    assert checkpoint_bytes(m1, schedule) == checkpoint_bytes(m2, schedule)


def test_train_rejects_empty(schedule):
    with pytest.raises(ParameterError):
        train(np.empty((0, 6)), schedule, TrainConfig())


def test_reverse_step_with_zero_model(schedule):
    model = NoisePredictor.zeros()
    x_T = np.array([0.3, -1.2, 0.5, 2.0, -0.1, 0.0])
    out = reverse_step(model, schedule, x_T, 100, np.zeros(6))
    np.testing.assert_allclose(out, x_T / math.sqrt(schedule.alpha[-1]), rtol=1e-15)


def test_sampling_is_seeded(schedule):
    model = NoisePredictor.init(1)
    a = sample(model, schedule, 20, seed=5)
    b = sample(model, schedule, 20, seed=5)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, sample(model, schedule, 20, seed=6))
    with pytest.raises(ParameterError):
        sample(model, schedule, 0, seed=5)


def test_zero_model_sample_variance(schedule):
    x = sample(NoisePredictor.zeros(), schedule, 4000, seed=9)
    predicted = zero_model_sample_variance(schedule)
    ratio = x.var(axis=0) / predicted
    assert np.all((ratio > 0.5) & (ratio < 2.0))
    # the closed form is exact; the sample variance should sit close to it
    assert np.all(np.abs(ratio - 1) < 0.1)


def test_checkpoint_round_trip(tmp_path, schedule):
    data = np.random.default_rng(0).uniform(-1, 1, (60, 6))
    model, _ = train(data, schedule, TrainConfig(epochs=2, seed=1))
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_checkpoint(model, schedule, p1)
    loaded, sched2 = load_checkpoint(p1)
    save_checkpoint(loaded, sched2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    np.testing.assert_array_equal(sched2.alpha_bar, schedule.alpha_bar)
    x = np.random.default_rng(2).standard_normal((3, 6))
    np.testing.assert_array_equal(predict_noise(loaded, x, [1, 50, 100]), predict_noise(model, x, [1, 50, 100]))


def test_checkpoint_rejects_bad_files(tmp_path, schedule):
    p = tmp_path / "m.json"
    save_checkpoint(NoisePredictor.init(0), schedule, p)
    text = p.read_text()
    p.write_text(text[: len(text) // 2])
    with pytest.raises(ParseError):
        load_checkpoint(p)
    p.write_text(text.replace('"version": 1', '"version": 99'))
    with pytest.raises(VersionError):
        load_checkpoint(p)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sample_shapes_are_finite(seed):
    x = sample(NoisePredictor.init(seed % 1000), build_schedule(20), 8, seed)
    assert x.shape == (8, 6)
    assert np.all(np.isfinite(x))
