"""The bounded per-day contribution mechanism for streaming measurement.

Each day the mechanism picks a contribution bound ``r_i`` (a private
quantile during warm-up, sparse-vector tracking afterwards), clips every
user to ``ceil(r_i)`` conversions, adds Gaussian noise scaled to the bound
and answers the workload rows whose support has closed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .accounting import (
    BoundedScales,
    BudgetLedger,
    check_rho,
    mechanism_budget,
    sensitivity,
    zcdp_budget_for_epsilon,
)
from .attribution import ConversionStream
from .quantile import DEFAULT_LAMBDA, QuantileParams, private_quantile, quantile_epsilon_for_rho
from .scales import ScalePlan, init_privacy_constrained
from .svt import SvtConfig, SvtState, svt_budget, update_bound_svt
from .workload import QueryWorkload


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AdsBpcConfig:
    rho_total: float = 1.0
    split: tuple = (0.7, 0.15, 0.15)
    l: int = 7
    p: float = 0.99
    lambda_cap: int = DEFAULT_LAMBDA
    svt: SvtConfig = field(default_factory=lambda: SvtConfig(epsilon=1.0))
    seed: int = 0

    def __post_init__(self):
        check_rho(self.rho_total, "rho_total")
        s = tuple(float(x) for x in self.split)
        if len(s) != 3 or min(s) <= 0 or abs(sum(s) - 1.0) > 1e-12:
            raise ConfigError("split must be three positive fractions summing to 1")
        object.__setattr__(self, "split", s)
        if int(self.l) != self.l or self.l < 1:
            raise ConfigError("l must be a positive integer")
        QuantileParams(self.p, 1.0, self.lambda_cap)

    @property
    def rho1(self) -> float:
        return self.split[0] * self.rho_total

    @property
    def rho2(self) -> float:
        """Per-day quantile budget."""
        return self.split[1] * self.rho_total / self.l

    @property
    def rho3(self) -> float:
        return self.split[2] * self.rho_total

    def quantile_params(self) -> QuantileParams:
        return QuantileParams(self.p, quantile_epsilon_for_rho(self.rho2), self.lambda_cap)

    def svt_config(self) -> SvtConfig:
        return replace(self.svt, epsilon=zcdp_budget_for_epsilon(self.rho3), l=self.l)


@dataclass
class DailyRelease:
    day: int
    bound: float
    noisy_row: np.ndarray
    query_answers: dict = field(default_factory=dict)


@dataclass
class AdsBpcRun:
    releases: list
    ledger: BudgetLedger
    plan: ScalePlan
    sigma: np.ndarray
    clip_bounds: np.ndarray
    answers: np.ndarray

    @property
    def bounds(self) -> np.ndarray:
        return np.array([r.bound for r in self.releases])

    @property
    def noisy_matrix(self) -> np.ndarray:
        return np.stack([r.noisy_row for r in self.releases])


class BoundEstimator:
    """Online per-day bound: private quantile for the first ``l`` days, then sparse-vector tracking."""

    def __init__(self, config: AdsBpcConfig, ledger: BudgetLedger, rng):
        self.config = config
        self.ledger = ledger
        self.rng = rng
        self.qparams = config.quantile_params()
        self.svt_cfg = config.svt_config()
        # noisy thresholds are drawn once, at the start of the stream
        self.state = SvtState.start(self.svt_cfg, rng)
        self._svt_charged = False

    def next_bound(self, day: int, counts: np.ndarray) -> float:
        cfg = self.config
        if day < cfg.l:
            self.ledger.charge("quantile", cfg.rho2)
            if counts.size:
                r = float(private_quantile(counts, self.qparams, self.rng))
            else:
                # nothing to measure; reuse yesterday's bound
                r = self.state.bound_list[-1] if self.state.bound_list else 1.0
            self.state.bound_list.append(r)
            return r
        if not self._svt_charged:
            self.ledger.charge("svt", svt_budget(self.svt_cfg.epsilon))
            self._svt_charged = True
        return update_bound_svt(counts, self.svt_cfg, self.state, self.rng)


def run_adsbpc(
    stream: ConversionStream,
    workload: QueryWorkload,
    config: AdsBpcConfig,
    plan: ScalePlan | None = None,
    noise: bool = True,
    bounds=None,
) -> AdsBpcRun:
    """Run the mechanism over all days of ``stream``.

    ``plan`` holds the unit-bound scales and must spend ``config.rho1``; by
    default the privacy-constrained plan for ``workload`` is used.  With
    ``noise=False`` every random draw is replaced by zero.  ``bounds`` forces
    the per-day bounds (test hook; skips bound estimation and its budget).
    """
    n = stream.n_days
    if workload.n != n:
        raise ConfigError(f"workload has {workload.n} days, stream has {n}")
    if plan is None:
        plan = init_privacy_constrained(workload, rho1=config.rho1)
    if plan.n != n:
        raise ConfigError("scale plan length differs from the number of days")
    if abs(plan.budget() - config.rho1) > 1e-9 * config.rho1:
        raise ConfigError(f"scale plan spends {plan.budget()}, expected rho1={config.rho1}")

    rng = np.random.default_rng(config.seed) if noise else None
    ledger = BudgetLedger()
    estimator = None if bounds is not None else BoundEstimator(config, ledger, rng)
    forced = None if bounds is None else np.broadcast_to(np.asarray(bounds, dtype=np.float64), (n,))

    k = stream.n_publishers
    last = workload.last_day()
    noisy = np.zeros((n, k))
    answers = np.full((workload.m, k), np.nan)
    sigma = np.empty(n)
    clip = np.empty(n)
    releases = []
    for i in range(n):
        counts = stream.day_counts(i)
        r = float(forced[i]) if forced is not None else estimator.next_bound(i, counts)
        c = math.ceil(r) if math.isfinite(r) else math.inf
        clip[i] = c
        sigma[i] = plan.sigma_bar[i] / plan.r_bar[i] * c
        row = stream.clipped_row(i, c)
        if rng is not None:
            row = row + rng.normal(0.0, sigma[i], size=k)
        noisy[i] = row
        due = np.flatnonzero(last == i)
        day_answers = {}
        if due.size:
            ans = workload.Q[due, : i + 1] @ noisy[: i + 1]
            answers[due] = ans
            day_answers = {int(j): a for j, a in zip(due, ans)}
        releases.append(DailyRelease(i, r, row, day_answers))

    if np.all(np.isfinite(clip)):
        ledger.charge("measurement", mechanism_budget(BoundedScales(clip, sigma)))
    return AdsBpcRun(releases, ledger, plan, sigma, clip, answers)


def sensitivity_multi(bs: BoundedScales) -> float:
    """L2 sensitivity of the scaled (day x publisher) matrix when row i changes by at most r_i in L1."""
    return sensitivity(bs)


# --------------------------------------------------------------------------
# run reports


def write_run_report(path, releases, publishers) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["day", "bound", "publisher", "noisy_value"])
        for rel in releases:
            for p, v in zip(publishers, rel.noisy_row):
                w.writerow([rel.day, repr(float(rel.bound)), p, repr(float(v))])


def write_answers(path, releases, publishers) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["day", "query", "publisher", "answer"])
        for rel in releases:
            for j in sorted(rel.query_answers):
                for p, v in zip(publishers, rel.query_answers[j]):
                    w.writerow([rel.day, j, p, repr(float(v))])
