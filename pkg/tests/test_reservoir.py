import numpy as np
import pytest

from wavereservoir.reservoir import (NoiseSource, ReservoirModel, init_reservoir,
                                     run, run_batch, step)
from wavereservoir.wave import (GridSpec, build_coupling_matrix,
                                init_damping_field, init_speed_field)


@pytest.fixture
def small():
    spec = GridSpec(n=5)
    c = init_speed_field(spec, 300.0, -30.0, 0.5, seed=1)
    k = init_damping_field(spec, 0.01)
    return init_reservoir(spec, c, k, alpha=0.1, input_gain=2.0, seed=4)


def test_linear_step_is_coupling_matrix(small):
    a = build_coupling_matrix(small.c, small.k, small.spec)
    x = np.random.default_rng(0).normal(size=small.state_dim)
    got = step(small, x, 0.0, None, activation=lambda h: h)
    np.testing.assert_allclose(got, a @ x, rtol=1e-12, atol=1e-13)


def test_input_enters_fast_row_only(small):
    n = small.spec.n
    assert np.all(small.w_in[n:] == 0)
    assert np.all((small.w_in[:n] >= 0) & (small.w_in[:n] < 2.0))


def test_zero_input_zero_noise_stays_at_rest(small):
    quiet = init_reservoir(small.spec, small.c, small.k, 0.1, 2.0, 0.0)
    tr = run(quiet, np.zeros(50))
    assert np.all(tr.p == 0)


def test_run_is_deterministic(small):
    s = np.random.default_rng(1).uniform(size=120)
    a = run(small, s, noise_seed=9).p
    b = run(small, s, noise_seed=9).p
    c = run(small, s, noise_seed=10).p
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_batch_matches_single_runs(small):
    rng = np.random.default_rng(2)
    sigs = rng.uniform(size=(3, 300))
    batch = run_batch(small, sigs, [5, 6, 7])
    for b in range(3):
        np.testing.assert_allclose(batch[b], run(small, sigs[b], noise_seed=5 + b).p,
                                   rtol=1e-12, atol=1e-14)


def test_noise_source_block_independent():
    a = NoiseSource(0.1, 4, 3, block=7)
    b = NoiseSource(0.1, 4, 3, block=256)
    for _ in range(20):
        np.testing.assert_array_equal(a.draw(), b.draw())


def test_noise_bounds():
    src = NoiseSource(1e-3, 50, 0)
    draws = np.array([src.draw() for _ in range(100)])
    assert np.abs(draws).max() <= 1e-3


def test_states_bounded_by_one(small):
    big = init_reservoir(small.spec, small.c, small.k, 0.5, 50.0)
    tr = run(big, np.ones(400), record_full=True)
    assert np.abs(tr.states).max() <= 1.0


def test_with_fields_rebuilds_weights(small):
    k2 = init_damping_field(small.spec, 0.05)
    m2 = small.with_fields(k=k2)
    assert (m2.w != small.w).nnz > 0
    np.testing.assert_array_equal(m2.w_in, small.w_in)


def test_validation(small):
    with pytest.raises(ValueError):
        init_reservoir(small.spec, small.c, small.k, alpha=0.0)
    with pytest.raises(ValueError):
        ReservoirModel(small.spec, small.c, small.k, 0.1, np.zeros(3))
    with pytest.raises(ValueError):
        run(small, np.zeros(0))
