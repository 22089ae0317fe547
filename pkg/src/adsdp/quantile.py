"""Exponential-mechanism estimate of a per-day contribution bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .accounting import BudgetError, check_rho

DEFAULT_LAMBDA = 10


class EmptyCountsError(ValueError):
    """Raised when a day has no contributing users; callers fall back to the previous bound."""


@dataclass(frozen=True)
class QuantileParams:
    p: float
    epsilon: float
    lambda_cap: int = DEFAULT_LAMBDA

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive and finite")
        if int(self.lambda_cap) != self.lambda_cap or self.lambda_cap < 1:
            raise ValueError("lambda_cap must be a positive integer")


def interval_log_weights(counts, params: QuantileParams) -> tuple[np.ndarray, np.ndarray]:
    """Interval endpoints ``c_0..c_{k+1}`` and the unnormalised log-mass of each interval."""
    c = np.sort(np.asarray(counts, dtype=np.float64))
    k = c.size
    if k == 0:
        raise EmptyCountsError("no counts to estimate a quantile from")
    lam = float(params.lambda_cap)
    edges = np.concatenate(([0.0], np.minimum(c, lam), [lam]))
    length = np.diff(edges)
    idx = np.arange(k + 1)
    with np.errstate(divide="ignore"):
        logw = np.log(length) - params.epsilon * np.abs(idx - params.p * k) / 2.0
    return edges, logw


def interval_probabilities(counts, params: QuantileParams) -> np.ndarray:
    _, logw = interval_log_weights(counts, params)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def private_quantile(counts, params: QuantileParams, rng: np.random.Generator | None) -> int:
    """Sample an integer bound in ``[1, lambda_cap]`` near the ``p`` quantile of ``counts``.

    ``rng=None`` is the noise-free hook: the exact order statistic, clamped.
    """
    edges, logw = interval_log_weights(counts, params)
    if rng is None:
        return exact_quantile(counts, params)
    w = np.exp(logw - logw.max())
    cdf = np.cumsum(w)
    u = rng.random() * cdf[-1]
    i = int(np.searchsorted(cdf, u, side="right"))
    i = min(i, cdf.size - 1)
    # guard against landing on a zero-mass interval through rounding
    while w[i] == 0.0:
        i -= 1
    c = rng.uniform(edges[i], edges[i + 1])
    return int(min(max(1, math.ceil(c)), params.lambda_cap))


def exact_quantile(counts, params: QuantileParams) -> int:
    """Order statistic at rank ``ceil(p * k)``, clamped to ``[1, lambda_cap]``."""
    c = np.sort(np.asarray(counts, dtype=np.float64))
    if c.size == 0:
        raise EmptyCountsError("no counts to estimate a quantile from")
    j = min(max(math.ceil(params.p * c.size), 1), c.size) - 1
    return int(min(max(1, math.ceil(c[j])), params.lambda_cap))


def quantile_budget(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not epsilon >= 0:
        raise BudgetError("epsilon must be non-negative")
    return min(epsilon * epsilon / 8.0, epsilon * math.tanh(epsilon / 2.0))


def quantile_epsilon_for_rho(rho2: float) -> float:
    """Largest epsilon whose quantile cost does not exceed ``rho2``."""
    rho2 = check_rho(rho2, "rho2")
    lo, hi = 0.0, 1.0
    while quantile_budget(hi) <= rho2:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if quantile_budget(mid) <= rho2:
            lo = mid
        else:
            hi = mid
    return lo
