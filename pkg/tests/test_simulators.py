import math

import numpy as np
import pytest
from scipy.stats import chisquare, kstest

from enkabc.gaussian import mvn_logpdf
from enkabc.simulators import (
    LV_OBS_TIMES,
    LV_THETA_STAR,
    LV_X0,
    LotkaVolterraModel,
    ToyModel,
    gaussian_noise_observe,
    gillespie_lv,
    gillespie_lv_batch,
    load_lv_csv,
    lv_first_events,
    lv_rates,
    lv_summary,
    make_observed_lv_data,
    save_lv_csv,
    toy_exact_abc_likelihood,
    toy_simulate,
)


def test_toy_simulate_moments():
    rng = np.random.default_rng(0)
    draws = ToyModel().simulate_batch(np.zeros(1), 10 ** 5, rng).ravel()
    assert abs(draws.mean()) < 4 / math.sqrt(10 ** 5)
    assert 0.95 < draws.var(ddof=1) < 1.05


def test_toy_simulate_determinism():
    a = toy_simulate(np.array([5.0]), np.random.default_rng(1))
    b = toy_simulate(np.array([5.0]), np.random.default_rng(1))
    assert np.array_equal(a, b)


def test_toy_exact_abc_likelihood():
    want = -0.5 * math.log(2 * math.pi * 1.01)
    assert toy_exact_abc_likelihood(np.zeros(1), 0.0, 0.1) == pytest.approx(want, abs=1e-12)
    vals = [toy_exact_abc_likelihood(np.zeros(1), 0.0, e) for e in (0.1, 1.0, 10.0)]
    assert vals[0] > vals[1] > vals[2]
    assert toy_exact_abc_likelihood(np.array([0.3]), 0.5, 0.2) == pytest.approx(
        mvn_logpdf(np.array([0.5]), np.array([0.3]), np.array([[1.04]])), abs=1e-12
    )
    with pytest.raises(ValueError):
        toy_exact_abc_likelihood(np.zeros(1), 0.0, 0.0)


def test_lv_rates_hand_values():
    rates = lv_rates(LV_THETA_STAR, (50, 100))
    assert np.allclose(rates, [100.0, 25.0, 30.0])
    assert rates.sum() == pytest.approx(155.0)


def test_lv_absorbing_state():
    path = gillespie_lv(LV_THETA_STAR, (0, 0), LV_OBS_TIMES, np.random.default_rng(2))
    assert not path.divergent
    assert np.all(path.predators == 0) and np.all(path.prey == 0)


def test_lv_counts_nonnegative_and_finite():
    rng = np.random.default_rng(3)
    states0 = np.broadcast_to(np.asarray(LV_X0), (200, 2)).copy()
    states, _ = gillespie_lv_batch(LV_THETA_STAR, states0, LV_OBS_TIMES, rng)
    assert np.all(states >= 0)
    first = states[:, 1, 1]
    assert first.mean() > 0


def test_lv_invalid_theta():
    with pytest.raises(ValueError):
        gillespie_lv((1.0, -0.1, 0.5), LV_X0, LV_OBS_TIMES, np.random.default_rng(0))


def test_lv_interevent_times_exponential():
    rng = np.random.default_rng(4)
    dts, _ = lv_first_events(LV_THETA_STAR, (50, 100), 10 ** 4, rng)
    assert kstest(dts, "expon", args=(0, 1 / 155.0)).pvalue > 0.001


def test_lv_reaction_proportions():
    rng = np.random.default_rng(5)
    _, reactions = lv_first_events(LV_THETA_STAR, (50, 100), 10 ** 4, rng)
    counts = np.bincount(reactions, minlength=3)
    expected = np.array([100.0, 25.0, 30.0]) / 155.0 * 10 ** 4
    assert chisquare(counts, expected).pvalue > 0.001


def test_lv_summary_interleaving_and_dim():
    path = gillespie_lv(LV_THETA_STAR, (0, 0), LV_OBS_TIMES, np.random.default_rng(6))
    path.predators[:] = 3
    path.prey[:] = 8
    s = lv_summary(path)
    assert s.shape == (32,)
    assert np.array_equal(s[0::2], np.full(16, 3.0))
    assert np.array_equal(s[1::2], np.full(16, 8.0))


def test_lv_summary_determinism():
    a = lv_summary(gillespie_lv(LV_THETA_STAR, LV_X0, LV_OBS_TIMES, np.random.default_rng(7)))
    b = lv_summary(gillespie_lv(LV_THETA_STAR, LV_X0, LV_OBS_TIMES, np.random.default_rng(7)))
    assert np.array_equal(a, b)


def test_make_observed_lv_data_pinned():
    path1, s1 = make_observed_lv_data()
    path2, s2 = make_observed_lv_data()
    assert np.array_equal(s1, s2)
    assert s1.shape == (32,)
    assert np.array_equal(path1.predators, path2.predators)


def test_observed_csv_roundtrip(tmp_path):
    path, _ = make_observed_lv_data()
    fname = tmp_path / "observed.csv"
    save_lv_csv(path, fname)
    loaded = load_lv_csv(fname)
    assert np.array_equal(loaded.predators, path.predators)
    assert np.array_equal(loaded.prey, path.prey)
    assert np.allclose(loaded.times, path.times)


def test_gaussian_noise_observe():
    rng = np.random.default_rng(8)
    x = np.arange(5.0)
    assert np.allclose(gaussian_noise_observe(x, 1e-12, rng), x, atol=1e-8)
    noisy = np.array([gaussian_noise_observe(np.zeros(1), 1.0, rng)[0] for _ in range(10 ** 5)])
    assert 0.97 < noisy.var(ddof=1) < 1.03
    a = gaussian_noise_observe(x, 0.5, np.random.default_rng(9))
    b = gaussian_noise_observe(x, 0.5, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_lv_model_batch_matches_summary_layout():
    model = LotkaVolterraModel()
    sims = model.simulate_batch(LV_THETA_STAR, 3, np.random.default_rng(10))
    assert sims.shape == (3, 32)
    # time-0 coordinates equal the fixed initial condition
    assert np.all(sims[:, 0] == LV_X0[0])
    assert np.all(sims[:, 1] == LV_X0[1])
