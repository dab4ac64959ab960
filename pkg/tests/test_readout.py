import numpy as np
import pytest

from wavereservoir.readout import (Readout, TrainConfig, TrainingDiverged,
                                   make_target, predict, sample_gradient,
                                   sgd_epoch, train)
from wavereservoir.reservoir import init_reservoir
from wavereservoir.signals import gen_beat_signal
from wavereservoir.wave import GridSpec, init_damping_field, init_speed_field


def loss(r, p, y):
    return float((p @ r.w_out + r.bias - y) ** 2)


def test_gradient_central_differences():
    rng = np.random.default_rng(0)
    for _ in range(50):
        m = rng.integers(1, 30)
        r = Readout(rng.normal(size=m), rng.normal())
        p, y = rng.normal(size=m), rng.normal()
        gw, gb = sample_gradient(r, p, y)
        h = 1e-6
        fd = np.empty(m)
        for i in range(m):
            up, dn = r.copy(), r.copy()
            up.w_out[i] += h
            dn.w_out[i] -= h
            fd[i] = (loss(up, p, y) - loss(dn, p, y)) / (2 * h)
        fb = (loss(Readout(r.w_out, r.bias + h), p, y)
              - loss(Readout(r.w_out, r.bias - h), p, y)) / (2 * h)
        scale = np.abs(np.append(gw, gb)).max()
        assert np.abs(np.append(fd, fb) - np.append(gw, gb)).max() <= 1e-6 * max(scale, 1)


def test_target_shift():
    s = np.arange(10.0)
    np.testing.assert_array_equal(make_target(s, 3), s[3:])
    with pytest.raises(ValueError):
        make_target(s, 10)


def test_predict_shape_check():
    r = Readout.zeros(4)
    with pytest.raises(ValueError):
        predict(r, np.ones(5))
    assert predict(Readout(np.ones(3), 0.5), np.ones((7, 3))).shape == (7,)


def test_sgd_reports_pre_update_error():
    r = Readout(np.zeros(2), 0.0)
    p = np.array([[1.0, 0.0]])
    new, mse = sgd_epoch(r, p, np.array([2.0]), lr=0.1)
    assert mse == 4.0
    # w -= 2 lr e p with e = -2
    np.testing.assert_allclose(new.w_out, [0.4, 0.0])
    assert new.bias == pytest.approx(0.4)


def test_sgd_recovers_linear_map():
    rng = np.random.default_rng(3)
    w_true = rng.normal(size=5)
    p = rng.normal(size=(4000, 5))
    y = p @ w_true + 0.3
    r = Readout.zeros(5)
    for _ in range(5):
        r, mse = sgd_epoch(r, p, y, lr=0.01)
    np.testing.assert_allclose(r.w_out, w_true, atol=1e-6)
    assert r.bias == pytest.approx(0.3, abs=1e-6)


def test_divergence_raises():
    p = np.full((200, 3), 10.0)
    with pytest.raises(TrainingDiverged):
        sgd_epoch(Readout.zeros(3), p, np.ones(200), lr=1.0)


def test_train_loss_decreases_and_resumes():
    spec = GridSpec(n=6)
    model = init_reservoir(spec, init_speed_field(spec, 300.0, -30.0, 0.5),
                           init_damping_field(spec, 0.003), input_gain=10.0)
    sigs = [gen_beat_signal(iv, 6.0, phase_s=0.1) for iv in (0.4, 0.55, 0.7)]
    cfg = TrainConfig(epochs=3, min_rel_improvement=0.0)
    full = train(model, sigs, cfg)
    assert len(full.loss_curve) == 3
    assert full.loss_curve[-1] < full.loss_curve[0]
    first = train(model, sigs, TrainConfig(epochs=2, min_rel_improvement=0.0))
    rest = train(model, sigs, TrainConfig(epochs=1, min_rel_improvement=0.0),
                 readout=first.readout, start_epoch=2)
    np.testing.assert_array_equal(rest.readout.w_out, full.readout.w_out)
    assert rest.loss_curve[0] == full.loss_curve[2]


def test_train_rejects_ragged_dataset():
    spec = GridSpec(n=3)
    model = init_reservoir(spec, init_speed_field(spec, 200.0), init_damping_field(spec))
    with pytest.raises(ValueError):
        train(model, [np.zeros(50), np.zeros(60)], TrainConfig(epochs=1))
