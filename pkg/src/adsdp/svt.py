"""Sparse-vector tracking of the per-day contribution bound.

Two detectors watch each day's contribution histogram: one asks whether too
many users exceed the running bound (raise it), the other whether few users
sit between ``s_down * tau`` and ``tau`` (lower it).  Each detector may report
at most ``k_max`` times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .accounting import puredp_to_zcdp, zcdp_budget_for_epsilon


@dataclass(frozen=True)
class SvtConfig:
    epsilon: float
    k_max: int = 7
    T_up: float = 50.0
    T_down: float = 50.0
    s_up: float = 1.3
    s_down: float = 0.8
    l: int = 7

    def __post_init__(self):
        if not (self.s_up > 1.0 > self.s_down > 0.0):
            raise ValueError("need s_up > 1 > s_down > 0")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ValueError("k_max must be a positive integer")
        if int(self.l) != self.l or self.l < 1:
            raise ValueError("l must be a positive integer")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive and finite")
        if not (self.T_up > 0 and self.T_down > 0):
            raise ValueError("thresholds must be positive")

    @classmethod
    def for_rho(cls, rho3: float, **kw) -> "SvtConfig":
        return cls(epsilon=zcdp_budget_for_epsilon(rho3), **kw)


@dataclass
class SvtState:
    noisy_T_up: float
    noisy_T_down: float
    count_up: int = 0
    count_down: int = 0
    bound_list: list = field(default_factory=list)

    @classmethod
    def start(cls, config: SvtConfig, rng: np.random.Generator | None, bound_list=()) -> "SvtState":
        """Fresh state with thresholds perturbed once at the start of the stream."""
        eps = config.epsilon / 2.0
        return cls(
            config.T_up + _laplace(rng, 2.0 / eps),
            -config.T_down + _laplace(rng, 2.0 / eps),
            bound_list=list(bound_list),
        )


def _laplace(rng: np.random.Generator | None, scale: float) -> float:
    # rng=None is the noise-free test hook
    if rng is None:
        return 0.0
    return float(rng.laplace(0.0, scale))


def above_threshold(counts, tau: float) -> int:
    """Number of users with strictly more than ``tau`` contributions.

    ``counts`` is a per-user count array or a ``ContributionHistogram``.
    """
    if hasattr(counts, "values") and callable(counts.values):
        counts = counts.values()
    return _kernels.count_above(np.asarray(counts, dtype=np.int64), tau)


def check_update(q, epsilon, count, noisy_T, k_max, T, rng):
    """One sparse-vector comparison; returns ``(fired, count, noisy_T)``."""
    if count >= k_max:
        return False, count, noisy_T
    q_noisy = q + _laplace(rng, 4.0 * k_max / epsilon)
    if q_noisy > noisy_T:
        return True, count + 1, T + _laplace(rng, 2.0 / epsilon)
    return False, count, noisy_T


def update_bound_svt(counts, config: SvtConfig, state: SvtState, rng) -> float:
    """Propose today's bound from the running mean of recent bounds and append it."""
    if not state.bound_list:
        raise ValueError("bound_list must hold at least one earlier bound")
    eps = config.epsilon / 2.0
    tau = float(np.mean(state.bound_list[-config.l :]))
    above = above_threshold(counts, tau)
    q_up = above
    q_down = above - above_threshold(counts, tau * config.s_down)
    is_up, state.count_up, state.noisy_T_up = check_update(
        q_up, eps, state.count_up, state.noisy_T_up, config.k_max, config.T_up, rng
    )
    is_down, state.count_down, state.noisy_T_down = check_update(
        q_down, eps, state.count_down, state.noisy_T_down, config.k_max, -config.T_down, rng
    )
    if is_up == is_down:
        r = tau
    elif is_up:
        r = tau * config.s_up
    else:
        r = tau * config.s_down
    r = max(r, 1.0)
    state.bound_list.append(r)
    return r


def svt_budget(epsilon: float) -> float:
    return puredp_to_zcdp(epsilon)
