import math

import numpy as np
import pytest

from adsdp.attribution import ConversionStream
from adsdp.baselines import (
    GlobalSensitivityConfig,
    StreamConfig,
    bin_tree,
    dyadic_cover,
    ipa,
    ipa_sigma,
    mmbpc,
    mmbpc_sigma,
    sqrt_coefficients,
    sqrt_factor,
    stream_mech,
    tree_height,
    umm,
    umm_sigma,
)
from adsdp.mechanism import AdsBpcConfig
from adsdp.synth import Family, SynthSpec, generate
from adsdp.workload import QueryWorkload, prefix_sum_workload, sliding_window_workload


def test_ipa_sigma():
    # event rho = 1/25, L2 sqrt(2): sigma^2 = 2 / (2/25) = 25
    assert ipa_sigma(GlobalSensitivityConfig(5, 1.0)) ** 2 == pytest.approx(25.0)


def test_ipa_noise_free_exact():
    X = np.arange(12.0).reshape(4, 3)
    w = prefix_sum_workload(4)
    run = ipa(X, w, GlobalSensitivityConfig(3), noise=False)
    assert np.allclose(run.answers, w.Q @ X)
    assert run.ledger.total == pytest.approx(1.0)


def test_bin_single_day_is_ipa():
    cfg = GlobalSensitivityConfig(4, 0.5)
    X = np.array([[3.0, 1.0]])
    w = prefix_sum_workload(1)
    a = bin_tree(X, w, cfg, seed=9)
    b = ipa(X, w, cfg, seed=9)
    assert a.info["sigma_node"] == pytest.approx(ipa_sigma(cfg))
    assert np.allclose(a.answers, b.answers)


@pytest.mark.parametrize("n", [1, 2, 5, 16, 31, 64])
def test_dyadic_cover_exact_and_short(n):
    h = tree_height(n)
    assert 2**h >= n
    for a in range(n):
        for b in range(a, n):
            nodes = dyadic_cover(a, b)
            covered = sorted(i for lev, idx in nodes for i in range(idx << lev, (idx + 1) << lev))
            assert covered == list(range(a, b + 1))
            assert len(nodes) <= 2 * (h + 1)
            if a == 0:
                # prefixes need at most one node per level
                assert len(nodes) <= h + 1


@pytest.mark.parametrize("wl", [prefix_sum_workload(13), sliding_window_workload(13, 4)])
def test_bin_noise_free_exact(wl):
    X = np.random.default_rng(0).integers(0, 9, (13, 2)).astype(float)
    run = bin_tree(X, wl, GlobalSensitivityConfig(2), noise=False)
    assert np.allclose(run.answers, wl.Q @ X)


def test_bin_handles_non_unit_rows():
    Q = np.array([[2.0, 2.0, 0.5, 0.0]])
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    run = bin_tree(X, QueryWorkload(Q, [1.0]), GlobalSensitivityConfig(1), noise=False)
    assert run.answers[0, 0] == pytest.approx(7.5)


def _doubling_stream():
    # one user: 2 conversions on day 0, 2 more on day 1, 4 more on day 2
    day = [0, 0, 1, 1, 2, 2, 2, 2, 3]
    return ConversionStream.single_touch(4, ["P"], [0] * 9, day, [0] * 9)


def test_stream_doubles_without_noise():
    s = _doubling_stream()
    cfg = StreamConfig(threshold=0.0)
    run = stream_mech(s, prefix_sum_workload(4), cfg, noise=False)
    assert run.info["tau"].tolist() == [2.0, 4.0, 8.0, 16.0]
    assert np.allclose(run.answers[:, 0], np.cumsum([2, 2, 4, 1]))
    capped = stream_mech(s, prefix_sum_workload(4), cfg, noise=False, gs=5)
    assert capped.info["tau"].tolist() == [2.0, 4.0, 5.0, 5.0]
    # the fifth conversion onwards is dropped once the cap is in force
    assert capped.answers[-1, 0] == pytest.approx(5.0)


def test_stream_stays_at_one_when_everyone_converts_once():
    s = ConversionStream.single_touch(3, ["P"], np.arange(30), np.arange(30) % 3, np.zeros(30, int))
    run = stream_mech(s, prefix_sum_workload(3), StreamConfig(threshold=0.0), noise=False)
    assert run.info["tau"].tolist() == [1.0, 1.0, 1.0]
    assert run.info["reports"] == 0


def test_stream_ledger():
    run = stream_mech(_doubling_stream(), prefix_sum_workload(4), StreamConfig(rho_total=2.0), seed=1)
    assert run.ledger.total == pytest.approx(2.0, abs=1e-9)
    assert run.ledger.by_label()["svt"] == pytest.approx(0.3, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 7, 31, 64])
def test_sqrt_factor_squares_to_prefix(n):
    B = sqrt_factor(n)
    assert np.allclose(B @ B, np.tril(np.ones((n, n))), atol=1e-9, rtol=0)
    assert sqrt_coefficients(4) == pytest.approx([1, 0.5, 0.375, 0.3125])


def test_umm_and_mmbpc_sigmas():
    cfg = GlobalSensitivityConfig(3, 1.0)
    # maximal column norm of B is its first column: sqrt(sum c_k^2)
    c = sqrt_coefficients(5)
    assert umm_sigma(5, cfg) == pytest.approx(3 * math.sqrt(2) * math.sqrt(np.sum(c**2)) / math.sqrt(2))
    assert mmbpc_sigma(5, 0.7) == pytest.approx(np.linalg.norm(np.cumsum(c)) / math.sqrt(1.4))


def test_umm_noise_free_exact():
    X = np.random.default_rng(2).random((9, 3))
    w = sliding_window_workload(9, 3)
    run = umm(X, w, GlobalSensitivityConfig(2), noise=False)
    assert np.allclose(run.answers, w.Q @ X)


def test_mmbpc_noise_free_and_ledger():
    s = _doubling_stream()
    w = prefix_sum_workload(4)
    run = mmbpc(s, w, AdsBpcConfig(), noise=False, bounds=np.inf)
    assert np.allclose(run.answers[:, 0], np.cumsum([2, 2, 4, 1]))
    # fewer days than l: only the days seen pay for a quantile
    short = mmbpc(s, w, AdsBpcConfig(seed=4))
    assert short.ledger.total == pytest.approx(0.7 + 4 * 0.15 / 7, abs=1e-9)
    long = generate(SynthSpec(Family.ZIPF, 100, 2, 10, seed=1))
    full = mmbpc(long, prefix_sum_workload(10), AdsBpcConfig(seed=4))
    assert full.ledger.total == pytest.approx(1.0, abs=1e-9)


def test_baselines_unbiased_monte_carlo():
    X = np.random.default_rng(1).integers(0, 5, (8, 1)).astype(float)
    w = prefix_sum_workload(8)
    cfg = GlobalSensitivityConfig(2)
    truth = w.Q @ X
    for fn in (ipa, bin_tree, umm):
        est = np.stack([fn(X, w, cfg, seed=s).answers for s in range(2000)])
        se = est.std(axis=0) / math.sqrt(2000)
        assert np.all(np.abs(est.mean(axis=0) - truth) <= 4 * se)
