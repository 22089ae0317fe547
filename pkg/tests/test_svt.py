import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsdp.attribution import ContributionHistogram
from adsdp.svt import SvtConfig, SvtState, above_threshold, check_update, update_bound_svt

# users per exact contribution level in the walkthrough dataset
WALKTHROUGH = {1: 1512, 2: 208, 5: 53, 8: 50, 10: 25, 13: 12, 20: 3}


def walkthrough_counts():
    return np.repeat(list(WALKTHROUGH), list(WALKTHROUGH.values()))


def test_walkthrough_counts():
    c = walkthrough_counts()
    assert [above_threshold(c, t) for t in (1, 2, 5, 8, 10, 13, 20)] == [351, 143, 90, 40, 15, 3, 0]


def test_walkthrough_lowers_bound_to_five():
    cfg = SvtConfig(epsilon=1.0, T_up=100, T_down=100, s_up=1.5, s_down=0.5, l=1)
    state = SvtState.start(cfg, None, bound_list=[10.0])
    assert state.noisy_T_up == 100 and state.noisy_T_down == -100
    r = update_bound_svt(walkthrough_counts(), cfg, state, None)
    assert r == 5.0
    assert (state.count_up, state.count_down) == (0, 1)
    assert state.bound_list == [10.0, 5.0]


def test_histogram_input():
    h = ContributionHistogram(0, {"a": 3, "b": 1, "c": 7})
    assert above_threshold(h, 2) == 2


def test_check_update_examples():
    assert check_update(15, 1.0, 0, 100, 7, 100, None) == (False, 0, 100)
    assert check_update(150, 1.0, 0, 100, 7, 100, None) == (True, 1, 100)
    # exhausted detector never fires again
    assert check_update(10**6, 1.0, 7, 100, 7, 100, None) == (False, 7, 100)
    rng = np.random.default_rng(0)
    fired, count, noisy_T = check_update(10**6, 1.0, 0, 100, 7, 100, rng)
    assert fired and count == 1 and noisy_T != 100


def test_both_fire_keeps_tau():
    # many users above tau and none in (s_down tau, tau]: both queries exceed tiny thresholds
    cfg = SvtConfig(epsilon=1.0, T_up=1, T_down=1e-9, l=1)
    state = SvtState.start(cfg, None, bound_list=[4.0])
    state.noisy_T_down = -1.0
    counts = np.full(10, 9)
    assert update_bound_svt(counts, cfg, state, None) == 4.0


def test_bound_clamped_at_one():
    cfg = SvtConfig(epsilon=1.0, T_up=100, T_down=100, l=1)
    state = SvtState.start(cfg, None, bound_list=[1.0])
    assert update_bound_svt(np.zeros(5, dtype=int), cfg, state, None) == 1.0


def test_k_max_caps_reports():
    cfg = SvtConfig(epsilon=1.0, T_up=1, T_down=100, k_max=2, l=1)
    state = SvtState.start(cfg, None, bound_list=[1.0])
    state.count_down = cfg.k_max  # silence the down detector
    counts = np.full(50, 1000)
    out = [update_bound_svt(counts, cfg, state, None) for _ in range(4)]
    assert out == pytest.approx([1.3, 1.69, 1.69, 1.69])
    assert state.count_up == 2


def test_running_mean_uses_last_l():
    cfg = SvtConfig(epsilon=1.0, T_up=1e9, T_down=1e9, l=2)
    state = SvtState.start(cfg, None, bound_list=[100.0, 2.0, 4.0])
    state.count_down = cfg.k_max
    assert update_bound_svt(np.ones(3, dtype=int), cfg, state, None) == 3.0


def test_config_validation():
    with pytest.raises(ValueError):
        SvtConfig(epsilon=1.0, s_up=0.9)
    with pytest.raises(ValueError):
        SvtConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        SvtConfig(epsilon=1.0, k_max=0)
    with pytest.raises(ValueError):
        update_bound_svt([1], SvtConfig(epsilon=1.0), SvtState(0.0, 0.0), None)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 12), min_size=1, max_size=20), st.floats(0.5, 12), st.sampled_from([0.5, 0.8]))
def test_queries_move_by_at_most_one_under_substitution(counts, tau, s_down):
    base = np.array(counts)

    def queries(c):
        up = above_threshold(c, tau)
        return up, up - above_threshold(c, tau * s_down)

    q0 = queries(base)
    for u in range(base.size):
        for new in range(0, 14):
            c = base.copy()
            c[u] = new
            q1 = queries(c)
            assert abs(q1[0] - q0[0]) <= 1
            assert abs(q1[1] - q0[1]) <= 1
