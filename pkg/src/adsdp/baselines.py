"""Comparison mechanisms releasing the same workloads at the same total budget.

These are reconstructions from one-paragraph descriptions; their job is a
fair relative comparison, not a bit-exact replica.  All of them except
``mmbpc`` rely on a known global cap ``GS`` on each user's conversions and
pay for it through group privacy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular, toeplitz
from scipy.special import gammaln

from .accounting import BudgetLedger, check_rho, zcdp_budget_for_epsilon, puredp_to_zcdp
from .attribution import ConversionStream
from .mechanism import AdsBpcConfig, BoundEstimator
from .svt import check_update
from .workload import QueryWorkload

EVENT_L2 = math.sqrt(2.0)  # one record moves between two cells under substitution


@dataclass(frozen=True)
class GlobalSensitivityConfig:
    GS: int
    rho_total: float = 1.0

    def __post_init__(self):
        if int(self.GS) != self.GS or self.GS < 1:
            raise ValueError("GS must be a positive integer")
        check_rho(self.rho_total, "rho_total")


@dataclass
class BaselineRun:
    answers: np.ndarray
    ledger: BudgetLedger
    info: dict


def _rng(seed, noise: bool):
    return np.random.default_rng(seed) if noise else None


def _normal(rng, scale, shape):
    if rng is None:
        return np.zeros(shape)
    return rng.normal(0.0, 1.0, size=shape) * scale


def _capped(stream: ConversionStream, GS: int) -> np.ndarray:
    # keep each user's first GS conversions overall; a no-op on data respecting the cap
    return stream.globally_clipped_matrix(np.full(stream.n_days, GS))


# --------------------------------------------------------------------------
# IPA: independent noise on every cell


def ipa_sigma(cfg: GlobalSensitivityConfig) -> float:
    event_rho = cfg.rho_total / cfg.GS**2
    return EVENT_L2 / math.sqrt(2.0 * event_rho)


def ipa(X: np.ndarray, workload: QueryWorkload, cfg: GlobalSensitivityConfig, seed=0, noise=True) -> BaselineRun:
    X = np.asarray(X, dtype=np.float64)
    sigma = ipa_sigma(cfg)
    noisy = X + _normal(_rng(seed, noise), sigma, X.shape)
    ledger = BudgetLedger()
    ledger.charge("release", cfg.rho_total)
    return BaselineRun(workload.Q @ noisy, ledger, {"sigma": sigma})


# --------------------------------------------------------------------------
# binary tree


def tree_height(n: int) -> int:
    return max(0, math.ceil(math.log2(n))) if n > 1 else 0


def dyadic_cover(a: int, b: int) -> list:
    """Canonical dyadic nodes ``(level, index)`` covering days ``a..b`` inclusive."""
    out = []
    lo, hi = a, b + 1
    level = 0
    while lo < hi:
        if lo & 1:
            out.append((level, lo))
            lo += 1
        if hi & 1:
            hi -= 1
            out.append((level, hi))
        lo >>= 1
        hi >>= 1
        level += 1
    return out


def _runs(row: np.ndarray):
    """Maximal runs of equal non-zero value: ``(start, end, value)`` with ``end`` inclusive."""
    nz = np.flatnonzero(row)
    runs = []
    if nz.size == 0:
        return runs
    start = prev = nz[0]
    for j in nz[1:]:
        if j == prev + 1 and row[j] == row[start]:
            prev = j
            continue
        runs.append((int(start), int(prev), float(row[start])))
        start = prev = j
    runs.append((int(start), int(prev), float(row[start])))
    return runs


def tree_nodes(X: np.ndarray, h: int) -> list:
    """Per-level node sums over ``2**h`` padded leaves; level 0 holds the leaves."""
    n, k = X.shape
    leaves = np.zeros((1 << h, k))
    leaves[:n] = X
    levels = [leaves]
    for _ in range(h):
        prev = levels[-1]
        levels.append(prev[0::2] + prev[1::2])
    return levels


def tree_answers(levels: list, workload: QueryWorkload) -> np.ndarray:
    k = levels[0].shape[1]
    out = np.zeros((workload.m, k))
    for j, row in enumerate(workload.Q):
        for a, b, val in _runs(row):
            for lev, idx in dyadic_cover(a, b):
                out[j] += val * levels[lev][idx]
    return out


def _noisy_levels(levels, sigma_of_node, rng):
    noisy = []
    for lev, arr in enumerate(levels):
        width = 1 << lev
        # a node becomes available on the last day it covers
        close = (np.arange(arr.shape[0]) + 1) * width - 1
        s = sigma_of_node(close)[:, None]
        noisy.append(arr + _normal(rng, s, arr.shape))
    return noisy


def bin_tree(X: np.ndarray, workload: QueryWorkload, cfg: GlobalSensitivityConfig, seed=0, noise=True) -> BaselineRun:
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    h = tree_height(n)
    event_rho = cfg.rho_total / cfg.GS**2
    sigma = math.sqrt(2.0 * (h + 1)) / math.sqrt(2.0 * event_rho)
    levels = tree_nodes(X, h)
    noisy = _noisy_levels(levels, lambda close: np.full(close.size, sigma), _rng(seed, noise))
    ledger = BudgetLedger()
    ledger.charge("release", cfg.rho_total)
    return BaselineRun(tree_answers(noisy, workload), ledger, {"sigma_node": sigma, "height": h})


# --------------------------------------------------------------------------
# Stream: doubling global bound tracked by a sparse vector


@dataclass(frozen=True)
class StreamConfig:
    rho_total: float = 1.0
    svt_share: float = 0.15
    threshold: float = 50.0
    k_max: int = 10

    def __post_init__(self):
        check_rho(self.rho_total, "rho_total")
        if not 0.0 < self.svt_share < 1.0:
            raise ValueError("svt_share must lie in (0, 1)")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ValueError("k_max must be a positive integer")


def stream_mech(
    stream: ConversionStream, workload: QueryWorkload, cfg: StreamConfig, seed=0, noise=True, gs: int | None = None
) -> BaselineRun:
    """Tree release whose bound starts at 1 and doubles when the sparse vector fires.

    With ``gs`` the bound in force is ``min(tau, gs)``: records beyond the
    global cap are already dropped, so a larger bound buys nothing.
    """
    n = stream.n_days
    rng = _rng(seed, noise)
    rho_svt = cfg.svt_share * cfg.rho_total
    rho_tree = cfg.rho_total - rho_svt
    eps = zcdp_budget_for_epsilon(rho_svt)
    noisy_T = cfg.threshold + (0.0 if rng is None else float(rng.laplace(0.0, 2.0 / eps)))
    count = 0

    totals = np.zeros(stream.n_users, dtype=np.int64)
    tau = np.empty(n)
    cur = 1
    for i in range(n):
        lo, hi = stream.day_ptr[i], stream.day_ptr[i + 1]
        np.add.at(totals, stream.user[lo:hi], 1)
        while True:
            q = int(np.count_nonzero(totals > cur))
            fired, count, noisy_T = check_update(q, eps, count, noisy_T, cfg.k_max, cfg.threshold, rng)
            if not fired:
                break
            cur *= 2
        tau[i] = cur if gs is None else min(cur, gs)

    X = stream.globally_clipped_matrix(tau)
    h = tree_height(n)
    levels = tree_nodes(X, h)
    scale = math.sqrt((h + 1) / rho_tree)
    # nodes closing past the last day are never used; give them the final bound
    noisy = _noisy_levels(levels, lambda close: tau[np.minimum(close, n - 1)] * scale, rng)
    ledger = BudgetLedger()
    ledger.charge("svt", puredp_to_zcdp(eps))
    ledger.charge("release", rho_tree)
    return BaselineRun(tree_answers(noisy, workload), ledger, {"tau": tau, "reports": count})


# --------------------------------------------------------------------------
# matrix mechanism with the square-root factor of the prefix matrix


def sqrt_coefficients(n: int) -> np.ndarray:
    """c_k = binom(2k, k) / 4**k, the power-series coefficients of (1 - x)**(-1/2)."""
    k = np.arange(n)
    return np.exp(gammaln(2 * k + 1) - 2 * gammaln(k + 1) - k * math.log(4.0))


def sqrt_factor(n: int) -> np.ndarray:
    """Lower-triangular Toeplitz B with B @ B equal to the prefix-sum matrix."""
    c = sqrt_coefficients(n)
    return np.tril(toeplitz(c))


def umm_sigma(n: int, cfg: GlobalSensitivityConfig) -> float:
    B = sqrt_factor(n)
    col = float(np.max(np.linalg.norm(B, axis=0)))
    event_rho = cfg.rho_total / cfg.GS**2
    return EVENT_L2 * col / math.sqrt(2.0 * event_rho)


def umm(X: np.ndarray, workload: QueryWorkload, cfg: GlobalSensitivityConfig, seed=0, noise=True) -> BaselineRun:
    X = np.asarray(X, dtype=np.float64)
    n, k = X.shape
    B = sqrt_factor(n)
    sigma = umm_sigma(n, cfg)
    z = _normal(_rng(seed, noise), sigma, (n, k))
    # L = W B^-1; answers W x + L z
    Binv_z = solve_triangular(B, z, lower=True)
    ledger = BudgetLedger()
    ledger.charge("release", cfg.rho_total)
    return BaselineRun(workload.Q @ X + workload.Q @ Binv_z, ledger, {"sigma": sigma})


# --------------------------------------------------------------------------
# matrix mechanism with per-day bounds


def mmbpc_sigma(n: int, rho1: float) -> float:
    """Noise on B' x when day i may change by r_i and column i of B is divided by r_i."""
    B = sqrt_factor(n)
    return float(np.linalg.norm(B.sum(axis=1))) / math.sqrt(2.0 * check_rho(rho1))


def mmbpc(
    stream: ConversionStream, workload: QueryWorkload, config: AdsBpcConfig, noise=True, bounds=None
) -> BaselineRun:
    """Square-root factorisation with columns rescaled by the online per-day bounds."""
    n, k = stream.n_days, stream.n_publishers
    rng = np.random.default_rng(config.seed) if noise else None
    ledger = BudgetLedger()
    estimator = None if bounds is not None else BoundEstimator(config, ledger, rng)
    forced = None if bounds is None else np.broadcast_to(np.asarray(bounds, dtype=np.float64), (n,))

    clip = np.empty(n)
    X = np.zeros((n, k))
    z = np.zeros((n, k))
    sigma = mmbpc_sigma(n, config.rho1)
    for i in range(n):
        r = float(forced[i]) if forced is not None else estimator.next_bound(i, stream.day_counts(i))
        clip[i] = math.ceil(r) if math.isfinite(r) else math.inf
        X[i] = stream.clipped_row(i, clip[i])
        z[i] = _normal(rng, sigma, k)
    x_hat = X
    if rng is not None:
        B = sqrt_factor(n)
        # B' = B diag(1/r); release y = B' x + z, reconstruct x_hat = diag(r) B^-1 y
        x_hat = X + clip[:, None] * solve_triangular(B, z, lower=True)
    if np.all(np.isfinite(clip)):
        ledger.charge("measurement", config.rho1)
    return BaselineRun(workload.Q @ x_hat, ledger, {"sigma": sigma, "bounds": clip})
