import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavereservoir.adaptation import (DsConfig, NormalizerState, SoftmaxNormalizer,
                                      SyncConfig, adapt_c, adapt_k, adaptive_run,
                                      contribution_scores, contribution_scores_resim,
                                      log_accumulator, select_neurons,
                                      speed_decision, sync_errors)
from wavereservoir.readout import Readout, predict
from wavereservoir.reservoir import init_reservoir, run
from wavereservoir.signals import gen_beat_signal
from wavereservoir.wave import GridSpec, init_damping_field, init_speed_field


def brute_log_acc(x, tau):
    t = np.arange(len(x))
    return np.array([math.log(np.sum(np.exp(x[:i + 1] - (i - t[:i + 1]) / tau)))
                     for i in range(len(x))])


def test_log_accumulator_matches_direct_sum():
    x = np.random.default_rng(0).normal(size=1000)
    want = brute_log_acc(x, 500.0)
    np.testing.assert_allclose(log_accumulator(x, 500.0), want, rtol=1e-9)


def test_normalizer_streams_across_windows():
    x = np.random.default_rng(1).uniform(0, 1, 600)
    whole = SoftmaxNormalizer(50.0)(x)
    norm = SoftmaxNormalizer(50.0)
    parts = np.concatenate([norm(x[:200]), norm(x[200:450]), norm(x[450:])])
    np.testing.assert_allclose(parts, whole, rtol=0, atol=0)


def test_normalizer_output_formula():
    x = np.array([0.5, 0.1, 0.9, 0.3])
    tau = 3.0
    beta = math.exp(-1 / tau)
    mean = x[0]
    out = SoftmaxNormalizer(tau)(x)
    for i in range(len(x)):
        if i:
            mean = beta * mean + (1 - beta) * x[i]
        ln_e = brute_log_acc(x[:i + 1], tau)[-1]
        assert out[i] == pytest.approx((x[i] - mean) / ln_e, rel=1e-12)


def test_normalizer_survives_large_inputs():
    out = SoftmaxNormalizer(500.0)(np.full(10, 800.0))
    assert np.all(np.isfinite(out))


def test_normalizer_degenerate_steps_counted():
    norm = SoftmaxNormalizer(10.0, state=NormalizerState())
    out = norm(np.full(5, -50.0))
    assert norm.degenerate_steps == 5 and np.all(out == 0)


def quarter_shift(sign, period=100, length=200):
    t = np.arange(length + 1)
    target = np.sin(2 * np.pi * t / period)
    pred = np.sin(2 * np.pi * (t + sign * period / 4) / period)
    return pred, target


def test_lead_counts_early_and_slows_down():
    pred, target = quarter_shift(+1)
    cfg = SyncConfig()
    e, l = sync_errors(pred, target, cfg)
    assert e > l
    assert speed_decision(0.0, e, l, cfg) == -1
    spec = GridSpec(n=3)
    c = init_speed_field(spec, 200.0, 0.0, 0.0)
    np.testing.assert_allclose(adapt_c(c, e, l, cfg, spec).values, c.values * 0.98)


def test_lag_counts_late_and_speeds_up():
    pred, target = quarter_shift(-1)
    cfg = SyncConfig()
    e, l = sync_errors(pred, target, cfg)
    assert l > e
    spec = GridSpec(n=3)
    c = init_speed_field(spec, 200.0, 0.0, 0.0)
    np.testing.assert_allclose(adapt_c(c, e, l, cfg, spec).values, c.values * 1.02)


def test_sync_errors_accumulate_counters():
    # target rises above a falling prediction on every step
    target = np.linspace(0.1, 1.0, 5)
    pred = np.linspace(0.0, -0.4, 5)
    e, l = sync_errors(pred, target)
    assert (e, l) == (1 + 2 + 3 + 4, 0)


@given(st.lists(st.tuples(st.floats(0, 500), st.floats(0, 500)), max_size=80))
@settings(max_examples=60, deadline=None)
def test_delta_sum_stays_in_budget(decisions):
    spec = GridSpec(n=2)
    cfg = SyncConfig()
    c = init_speed_field(spec, 150.0, 0.0, 0.0)
    for e, l in decisions:
        c = adapt_c(c, e, l, cfg, spec)
        assert abs(c.scale_accum) <= cfg.threshold_sum + 1e-9


def test_budget_edge_allows_step_back():
    cfg = SyncConfig()
    assert speed_decision(0.10, 0.0, 0.0, cfg) == 0
    assert speed_decision(0.10, 500.0, 0.0, cfg) == -1


def test_closed_form_scores_match_masking():
    rng = np.random.default_rng(2)
    p = rng.normal(size=(80, 6))
    r = Readout(rng.normal(size=6), 0.2)
    y = rng.normal(size=80)
    base = np.mean((predict(r, p) - y) ** 2)
    want = []
    for i in range(6):
        w = r.w_out.copy()
        w[i] = 0
        want.append(np.mean((predict(Readout(w, r.bias), p) - y) ** 2) - base)
    np.testing.assert_allclose(contribution_scores(p, r, y), want, rtol=1e-10, atol=1e-12)


def test_resim_clamping_read_neuron():
    spec = GridSpec(n=2)
    model = init_reservoir(spec, init_speed_field(spec, 200.0, 0.0, 0.0),
                           init_damping_field(spec), alpha=0.2, input_gain=1.0,
                           noise_amp=0.0)
    r = Readout(np.array([1.0, 0.0, 0.0, 0.0]))
    s = np.linspace(0, 1, 30)
    scores = contribution_scores_resim(model, r, np.zeros(spec.state_dim), s, s)
    assert scores.shape == (4,)
    # clamping the read neuron removes the whole prediction
    y = run(model, s).p[:, 0]
    assert scores[0] == pytest.approx(np.mean(s ** 2) - np.mean((y - s) ** 2), rel=1e-9)


def test_select_neurons_ties_and_disjoint():
    helpful, harmful = select_neurons(np.zeros(6), 2)
    assert helpful.tolist() == [0, 1] and harmful.tolist() == [5, 4]
    helpful, harmful = select_neurons(np.array([3.0, -1.0, 2.0]), 2)
    assert helpful.tolist() == [0, 2] and harmful.tolist() == [1]


def test_adapt_k_faces_and_edges():
    spec = GridSpec(n=3)
    k = init_damping_field(spec, 0.0)
    scores = np.zeros(9)
    scores[0] = 5.0  # corner cell: no left face, no face below it in row -1
    scores[4] = -5.0
    out = adapt_k(k, scores, DsConfig(n_select=1))
    assert out.kx[1, 0] == pytest.approx(0.002) and out.ky[0, 1] == pytest.approx(0.002)
    assert np.count_nonzero(out.kx) + np.count_nonzero(out.ky) == 2


def test_adapt_k_clamps():
    spec = GridSpec(n=2)
    k = init_damping_field(spec, 0.0, k_min=-0.001)
    out = adapt_k(k, np.array([0.0, 0.0, 0.0, 1.0]), DsConfig(n_select=1))
    assert out.kx[1, 0] == -0.001


@pytest.fixture(scope="module")
def trained_small():
    spec = GridSpec(n=6)
    model = init_reservoir(spec, init_speed_field(spec, 300.0, -30.0, 0.5),
                           init_damping_field(spec, 0.003), input_gain=10.0)
    sig = gen_beat_signal(0.5, 30.0, phase_s=0.2)
    r = Readout(np.random.default_rng(0).normal(scale=0.5, size=36), 0.1)
    return model, r, sig


def test_disabled_adaptation_is_plain_prediction(trained_small):
    model, r, sig = trained_small
    res = adaptive_run(model, r, sig, None, None, noise_seed=4)
    np.testing.assert_allclose(res.prediction, predict(r, run(model, sig, noise_seed=4).p),
                               rtol=1e-12, atol=1e-13)
    assert len(res.log) == 0


def test_adaptive_run_windows_and_flags(trained_small, tmp_path):
    model, r, sig = trained_small
    res = adaptive_run(model, r, sig, SyncConfig(), None, noise_seed=1)
    assert len(res.log) == 25
    assert all(rec.boosted == [] for rec in res.log.records)
    assert np.all(np.abs(res.log.delta_sums()) <= 0.1 + 1e-9)
    res = adaptive_run(model, r, sig, None, DsConfig(n_select=4), noise_seed=1)
    assert all(rec.c_decision == 0 for rec in res.log.records)
    assert len(res.log.records[3].boosted) == 4
    path = tmp_path / "log.jsonl"
    res.log.to_jsonl(path)
    assert '"sync_enabled": false' in path.read_text().splitlines()[0]
