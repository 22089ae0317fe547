import math

import numpy as np
import pytest

from adsdp.quantile import (
    EmptyCountsError,
    QuantileParams,
    exact_quantile,
    interval_probabilities,
    private_quantile,
    quantile_budget,
    quantile_epsilon_for_rho,
)


def test_budget_examples():
    assert quantile_budget(1.0) == pytest.approx(0.125)
    assert quantile_budget(10.0) == pytest.approx(10 * math.tanh(5))
    eps = quantile_epsilon_for_rho(0.15 / 7)
    assert quantile_budget(eps) <= 0.15 / 7
    assert quantile_budget(eps * (1 + 1e-9)) > 0.15 / 7


def test_small_distribution_by_hand():
    # counts 1, 2, 3 with cap 5; interval lengths 1, 1, 1, 2
    prm = QuantileParams(0.5, 1.0, 5)
    probs = interval_probabilities([3, 1, 2], prm)
    w = np.array([1, 1, 1, 2]) * np.exp(-np.abs(np.arange(4) - 1.5) / 2)
    assert np.allclose(probs, w / w.sum())


def test_sampling_follows_interval_masses():
    prm = QuantileParams(0.5, 1.0, 5)
    counts = [1, 2, 3]
    probs = interval_probabilities(counts, prm)
    # integer outputs: interval (0,1] -> 1, (1,2] -> 2, (2,3] -> 3, (3,5] -> 4 or 5 evenly
    expect = np.array([probs[0], probs[1], probs[2], probs[3] / 2, probs[3] / 2])
    rng = np.random.default_rng(7)
    N = 100_000
    draws = np.array([private_quantile(counts, prm, rng) for _ in range(N)])
    freq = np.bincount(draws, minlength=6)[1:] / N
    tol = 3 * np.sqrt(expect * (1 - expect) / N)
    assert np.all(np.abs(freq - expect) <= tol + 1e-12)


def test_range_and_zero_mass_intervals():
    prm = QuantileParams(0.99, 0.3, 4)
    rng = np.random.default_rng(1)
    for counts in ([7, 7, 7], [4, 4], [1], [10, 1, 2]):
        for _ in range(200):
            assert 1 <= private_quantile(counts, prm, rng) <= 4


def test_larger_epsilon_concentrates():
    rng = np.random.default_rng(3)
    # mostly distinct counts, so every interval has mass
    counts = rng.integers(1, 400, 500)
    true = exact_quantile(counts, QuantileParams(0.9, 1.0, 400))
    spread = []
    for eps in (0.05, 0.5, 5.0):
        prm = QuantileParams(0.9, eps, 400)
        d = np.array([private_quantile(counts, prm, rng) for _ in range(2000)])
        spread.append(np.mean((d - true) ** 2))
    assert spread[0] > spread[1] > spread[2]


def test_errors():
    with pytest.raises(EmptyCountsError):
        private_quantile([], QuantileParams(0.5, 1.0), np.random.default_rng(0))
    with pytest.raises(ValueError):
        QuantileParams(1.0, 1.0)
    with pytest.raises(ValueError):
        QuantileParams(0.5, 0.0)
    with pytest.raises(ValueError):
        QuantileParams(0.5, 1.0, 0)


def test_noise_free_hook():
    prm = QuantileParams(0.5, 1.0, 10)
    assert private_quantile([1, 2, 3, 4], prm, None) == 2
    assert exact_quantile([30, 40], prm) == 10
