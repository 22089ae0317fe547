"""zCDP budget arithmetic.

Budgets are plain floats in zCDP units (rho).  ``BudgetLedger`` records the
sequential composition of a run so callers can assert where rho went.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar


class BudgetError(ValueError):
    pass


def check_rho(rho: float, name: str = "rho") -> float:
    rho = float(rho)
    if not (rho > 0 and math.isfinite(rho)):
        raise BudgetError(f"{name} must be positive and finite, got {rho}")
    return rho


@dataclass(frozen=True)
class BoundedScales:
    r: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=np.float64)
        s = np.asarray(self.sigma, dtype=np.float64)
        if r.shape != s.shape or r.ndim != 1:
            raise BudgetError("r and sigma must be vectors of equal length")
        if not (np.all(r > 0) and np.all(s > 0)):
            raise BudgetError("per-day bounds and scales must be positive")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "sigma", s)


@dataclass
class BudgetLedger:
    """Sequential composition: the total is the sum of recorded charges."""

    entries: list = field(default_factory=list)

    def charge(self, label: str, rho: float) -> None:
        if rho < 0:
            raise BudgetError("cannot charge a negative budget")
        self.entries.append((label, float(rho)))

    @property
    def total(self) -> float:
        return math.fsum(r for _, r in self.entries)

    def by_label(self) -> dict:
        out: dict = {}
        for label, r in self.entries:
            out[label] = out.get(label, 0.0) + r
        return out


def _log_delta(alpha: float, rho: float, epsilon: float) -> float:
    return (alpha - 1.0) * (alpha * rho - epsilon) - math.log(alpha - 1.0) + alpha * math.log1p(-1.0 / alpha)


def zcdp_to_dp(rho: float, epsilon: float) -> float:
    """Smallest delta such that rho-zCDP implies (epsilon, delta)-DP."""
    rho = check_rho(rho)
    epsilon = float(epsilon)
    if not epsilon > 0:
        raise BudgetError("epsilon must be positive")
    # the log-objective is convex in alpha; bracket the optimum on a log grid first
    grid = 1.0 + np.logspace(-8, 6, 2001)
    vals = np.array([_log_delta(a, rho, epsilon) for a in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(
        _log_delta, bounds=(lo, hi), args=(rho, epsilon), method="bounded", options={"xatol": 1e-12 * hi}
    )
    best = min(res.fun, vals[i])
    return float(min(math.exp(best), 1.0))


def puredp_to_zcdp(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not epsilon >= 0:
        raise BudgetError("epsilon must be non-negative")
    return epsilon * math.tanh(epsilon / 2.0)


def zcdp_budget_for_epsilon(target_rho: float) -> float:
    """Invert :func:`puredp_to_zcdp` by bisection."""
    target_rho = check_rho(target_rho, "target rho")
    lo, hi = 0.0, 1.0
    while puredp_to_zcdp(hi) < target_rho:
        hi *= 2.0
    while hi - lo > 1e-12 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if puredp_to_zcdp(mid) < target_rho:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def group_privacy(rho_event: float, k: int) -> float:
    if int(k) != k or k < 1:
        raise BudgetError("group size must be a positive integer")
    return float(k) ** 2 * check_rho(rho_event)


def mechanism_budget(bs: BoundedScales) -> float:
    """zCDP cost of independent per-day Gaussian noise under per-day contribution bounds."""
    return 0.5 * math.fsum((bs.r / bs.sigma) ** 2)


def sensitivity(bs: BoundedScales) -> float:
    """L2 sensitivity of x -> diag(1/sigma) x when day i may change by up to r_i."""
    return math.sqrt(math.fsum((bs.r / bs.sigma) ** 2))


def gaussian_sigma(delta2: float, rho: float) -> float:
    if not delta2 > 0:
        raise BudgetError("sensitivity must be positive")
    return float(delta2) / math.sqrt(2.0 * check_rho(rho))
