import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavereservoir.evaluation import (detect_peaks, interval_errors, lag_by_xcorr,
                                      match_peaks, neuron_spectra, random_reservoir,
                                      resonance_map, time_offset_ratio)
from wavereservoir.reservoir import init_reservoir
from wavereservoir.signals import gen_beat_signal, pulse_train
from wavereservoir.wave import GridSpec, init_damping_field, init_speed_field, spectral_radius


def test_constant_series_has_no_peaks():
    assert len(detect_peaks(np.ones(100), 0.006)) == 0


def test_close_pulses_keep_taller():
    dt = 0.006
    x = pulse_train(np.array([0.3]), 200, dt, 0.06) + 0.5 * pulse_train(np.array([0.4]), 200, dt, 0.06)
    peaks = detect_peaks(x, dt, min_height=0.1, min_separation_s=0.2)
    assert peaks == pytest.approx([0.3], abs=dt)


def test_parabolic_refinement_subsample():
    dt = 0.01
    t = np.arange(100) * dt
    x = np.exp(-((t - 0.5037) / 0.05) ** 2)
    assert detect_peaks(x, dt)[0] == pytest.approx(0.5037, abs=2e-4)


def test_min_separation_must_exceed_dt():
    with pytest.raises(ValueError):
        detect_peaks(np.zeros(5), 0.01, min_separation_s=0.01)


def test_identical_peaks_zero_offset():
    peaks = np.arange(10) * 0.5
    stats = time_offset_ratio(peaks, peaks, 0.5)
    assert stats.mean == 0 and stats.variance == 0 and stats.matched_count == 10


def test_uniformly_early_predictions():
    targ = 1 + np.arange(10) * 0.5
    stats = time_offset_ratio(targ - 0.02, targ, 0.5)
    assert stats.mean == pytest.approx(0.04)
    np.testing.assert_allclose(stats.ratios, 0.04)


def test_missing_beat_counted():
    targ = np.arange(10) * 0.5
    pred = np.delete(targ, 4) + 0.01
    stats = time_offset_ratio(pred, targ, 0.5)
    assert (stats.matched_count, stats.missed_count, stats.spurious_count) == (9, 1, 0)
    np.testing.assert_allclose(stats.ratios, -0.02)


def test_spurious_and_gate():
    stats = time_offset_ratio([0.0, 0.26, 5.0], [0.0], 0.5)
    assert (stats.matched_count, stats.spurious_count) == (1, 2)
    with pytest.raises(ValueError):
        time_offset_ratio([1.0], [], 0.5)
    with pytest.raises(ValueError):
        time_offset_ratio([1.0], [1.0], 0.0)


@given(st.lists(st.floats(0, 20), min_size=1, max_size=15),
       st.lists(st.floats(0, 20), min_size=1, max_size=15), st.randoms())
@settings(max_examples=100, deadline=None)
def test_matching_ignores_input_order(pred, targ, rnd):
    a = time_offset_ratio(pred, targ, 1.0)
    rnd.shuffle(pred)
    rnd.shuffle(targ)
    b = time_offset_ratio(pred, targ, 1.0)
    assert a.pairs == b.pairs


def test_matching_closest_pair_first():
    # 0.9 is closer to the target at 1.0 than to the one at 0.0
    assert match_peaks([0.9], [0.0, 1.0], 1.0) == [(1, 0)]


def test_interval_errors():
    assert interval_errors(np.arange(6) * 0.5, 0.5) == (0.0, 0.0)
    gaps = np.tile([0.48, 0.52], 5)
    mae, var = interval_errors(np.concatenate([[0], np.cumsum(gaps)]), 0.5)
    assert mae == pytest.approx(0.02) and var == pytest.approx(0.0, abs=1e-20)
    with pytest.raises(ValueError):
        interval_errors([1.0], 0.5)


def test_xcorr_lag_sign():
    sig = gen_beat_signal(0.7, 10.0).samples
    delayed = np.concatenate([np.zeros(20), sig[:-20]])
    assert lag_by_xcorr(delayed, sig, 0.006) == pytest.approx(0.12)
    assert lag_by_xcorr(sig, delayed, 0.006) == pytest.approx(-0.12)


def test_spectra_pick_sine_frequency():
    dt = 0.006
    t = np.arange(4096) * dt
    freqs, spec = neuron_spectra(np.sin(2 * np.pi * 3.0 * t)[:, None], dt)
    assert abs(freqs[np.argmax(spec[0])] - 3.0) <= freqs[1]
    assert freqs.max() == pytest.approx(0.5 / dt)


def test_zero_excitation_zero_spectra():
    spec = GridSpec(n=4)
    model = init_reservoir(spec, init_speed_field(spec, 250.0), init_damping_field(spec))
    rmap = resonance_map(model, np.zeros(2600))
    assert np.all(rmap.spectra == 0) and np.all(rmap.dominant_freq == 0)
    with pytest.raises(ValueError):
        resonance_map(model, np.zeros(2000))


def test_uniform_field_uniform_resonance():
    spec = GridSpec(n=8)
    model = init_reservoir(spec, init_speed_field(spec, 150.0, 0.0, 0.0),
                           init_damping_field(spec, 0.003), input_gain=1.0)
    t = np.arange(3000) * spec.dt
    med = resonance_map(model, 0.5 + 0.5 * np.sin(2 * np.pi * 1.5 * t),
                        settle_steps=0).row_medians()
    assert (med.max() - med.min()) / med.mean() < 0.2


def test_random_reservoir_density_full_size():
    spec = GridSpec(n=40)
    nnz = random_reservoir(spec, 0.01, 0.95, seed=0).w.nnz
    # 4800^2 slots at 1% density
    assert 0.0098 * 4800 ** 2 < nnz < 0.0102 * 4800 ** 2


def test_random_reservoir_radius_dense_check():
    spec = GridSpec(n=16)
    model = random_reservoir(spec, 0.01, 0.95, seed=2)
    assert spectral_radius(model.w, dense_limit=5000) == pytest.approx(0.95, rel=0.01)
    np.testing.assert_array_equal(model.w_in, random_reservoir(spec, seed=2).w_in)


def test_random_reservoir_validation():
    spec = GridSpec(n=4)
    with pytest.raises(ValueError):
        random_reservoir(spec, spectral_radius=0.0)
    with pytest.raises(ValueError):
        random_reservoir(spec, density=1.5)
