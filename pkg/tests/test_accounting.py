import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsdp.accounting import (
    BoundedScales,
    BudgetError,
    BudgetLedger,
    gaussian_sigma,
    group_privacy,
    mechanism_budget,
    puredp_to_zcdp,
    sensitivity,
    zcdp_budget_for_epsilon,
    zcdp_to_dp,
)


def _delta_grid(rho, eps):
    # independent oracle: dense log grid over alpha, no local refinement
    a = 1.0 + np.logspace(-9, 7, 400_001)
    ld = (a - 1) * (a * rho - eps) - np.log(a - 1) + a * np.log1p(-1 / a)
    return min(math.exp(ld.min()), 1.0)


@pytest.mark.parametrize("rho,eps", [(0.1, 1.0), (1.0, 3.0), (1.0, 10.0), (0.01, 0.5), (5.0, 20.0)])
def test_zcdp_to_dp_matches_grid(rho, eps):
    got = zcdp_to_dp(rho, eps)
    ref = _delta_grid(rho, eps)
    assert got <= ref * (1 + 1e-9) + 1e-300
    assert got >= ref * (1 - 1e-4)


def test_zcdp_to_dp_beats_classic_bound():
    # delta from the simple conversion eps = rho + 2 sqrt(rho log(1/delta)) is never better
    rho, delta = 0.5, 1e-6
    eps = rho + 2 * math.sqrt(rho * math.log(1 / delta))
    assert zcdp_to_dp(rho, eps) <= delta


def test_puredp_examples():
    assert puredp_to_zcdp(0.0) == 0.0
    assert puredp_to_zcdp(1.0) == pytest.approx(math.tanh(0.5))
    assert puredp_to_zcdp(1.0) <= 0.5  # never worse than eps^2 / 2
    with pytest.raises(BudgetError):
        puredp_to_zcdp(-1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 50.0))
def test_budget_inversion(rho):
    eps = zcdp_budget_for_epsilon(rho)
    assert puredp_to_zcdp(eps) == pytest.approx(rho, rel=1e-9)


def test_group_privacy():
    assert group_privacy(0.1, 3) == pytest.approx(0.9)
    with pytest.raises(BudgetError):
        group_privacy(0.1, 0)
    with pytest.raises(BudgetError):
        group_privacy(0.1, 1.5)


def test_mechanism_budget_and_sensitivity():
    bs = BoundedScales([1.0, 2.0], [1.0, 2.0])
    assert sensitivity(bs) == pytest.approx(math.sqrt(2))
    assert mechanism_budget(bs) == pytest.approx(1.0)
    assert gaussian_sigma(math.sqrt(2), 1.0) == pytest.approx(1.0)
    with pytest.raises(BudgetError):
        BoundedScales([1.0, 0.0], [1.0, 1.0])
    with pytest.raises(BudgetError):
        BoundedScales([1.0], [1.0, 1.0])


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_invalid_rho(bad):
    with pytest.raises(BudgetError):
        zcdp_to_dp(bad, 1.0)


def test_ledger():
    led = BudgetLedger()
    led.charge("a", 0.1)
    led.charge("b", 0.2)
    led.charge("a", 0.3)
    assert led.total == pytest.approx(0.6)
    assert led.by_label() == pytest.approx({"a": 0.4, "b": 0.2})
    with pytest.raises(BudgetError):
        led.charge("c", -0.1)
