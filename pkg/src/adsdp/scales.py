"""Initial per-day noise scales for the diagonal Gaussian mechanism.

Two calibration problems are solved for scales sigma_bar at unit per-day
bounds r_bar:

* privacy constrained: minimise sum_i a_i sigma_i^2 subject to
  (1/2) sum_i r_i^2 / sigma_i^2 <= rho, where a_i = sum_j gamma_j^2 Q[j, i]^2.
  Closed form via Cauchy-Schwarz.
* utility constrained: minimise sum_i r_i^2 / t_i subject to per-query
  variance caps sum_i Q[j, i]^2 t_i <= v_j, with t_i = sigma_i^2.  Solved by
  a log-barrier Newton method that stops on a certified duality gap.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import nnls

from .accounting import BoundedScales, check_rho, mechanism_budget
from .workload import QueryWorkload

DEGENERATE_SHARE = 1e-9


class Objective(str, enum.Enum):
    WEIGHTED_VARIANCE_SUM = "weighted_variance_sum"
    MIN_BUDGET_UNDER_VARIANCE_CAPS = "min_budget_under_variance_caps"


@dataclass(frozen=True)
class ScalePlan:
    sigma_bar: np.ndarray
    objective: Objective
    rho1: float
    r_bar: np.ndarray = None
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.asarray(self.sigma_bar, dtype=np.float64)
        object.__setattr__(self, "sigma_bar", s)
        r = np.ones_like(s) if self.r_bar is None else np.asarray(self.r_bar, dtype=np.float64)
        object.__setattr__(self, "r_bar", r)

    @property
    def n(self) -> int:
        return self.sigma_bar.size

    def budget(self) -> float:
        return mechanism_budget(BoundedScales(self.r_bar, self.sigma_bar))

    def scales_for(self, r) -> np.ndarray:
        return rescale(self.sigma_bar, self.r_bar, r)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["day", "sigma_bar"])
            for i, s in enumerate(self.sigma_bar):
                w.writerow([i, repr(float(s))])


def cauchy_coefficients(workload: QueryWorkload) -> np.ndarray:
    return (workload.gamma[:, None] ** 2 * workload.Q**2).sum(axis=0)


def init_privacy_constrained(workload: QueryWorkload, r_bar=None, rho1: float = 1.0, gamma=None) -> ScalePlan:
    if gamma is not None:
        workload = workload.with_gamma(gamma)
    rho1 = check_rho(rho1, "rho1")
    n = workload.n
    r = np.ones(n) if r_bar is None else np.asarray(r_bar, dtype=np.float64)
    if r.shape != (n,) or np.any(r <= 0):
        raise ValueError("r_bar must be n positive values")
    a = cauchy_coefficients(workload)
    active = a > 0
    n_dead = int(n - active.sum())
    if not active.any():
        raise ValueError("workload queries no day")

    sig2 = np.empty(n)
    # never-queried days get a vanishing share of the budget
    dead_rho = DEGENERATE_SHARE * rho1 / n
    live_rho = rho1 - n_dead * dead_rho
    sig2[~active] = r[~active] ** 2 / (2.0 * dead_rho)
    sa = np.sqrt(a[active])
    total = float(np.sum(sa * r[active]))
    sig2[active] = (r[active] / sa) * total / (2.0 * live_rho)
    objective = float(np.sum(a * sig2))
    return ScalePlan(
        np.sqrt(sig2),
        Objective.WEIGHTED_VARIANCE_SUM,
        rho1,
        r,
        {"objective": objective, "a": a},
    )


def privacy_objective(workload: QueryWorkload, sigma) -> float:
    return float(np.sum(cauchy_coefficients(workload) * np.asarray(sigma) ** 2))


# --------------------------------------------------------------------------
# utility constrained


def _kkt_report(A, v, c, t, mu):
    grad = -c / t**2
    stat = grad + A.T @ mu
    slack = v - A @ t
    f = float(np.sum(c / t))
    return {
        "stationarity": float(np.max(np.abs(stat)) / np.max(np.abs(grad))),
        "primal_infeasibility": float(max(0.0, np.max(-slack / v))),
        "complementarity": float(np.sum(mu * np.maximum(slack, 0.0)) / f),
        "dual_nonneg": float(max(0.0, -np.min(mu))),
    }


def _dual_value(A, v, c, mu) -> float:
    w = A.T @ mu
    return float(np.sum(2.0 * np.sqrt(c * w)) - mu @ v)


def _polish_multipliers(A, v, c, t, mu_barrier):
    """Pick the better dual point: the barrier estimate or an NNLS fit on near-active rows.

    Barrier multipliers lose digits once slacks reach rounding level; any
    non-negative mu still gives a valid lower bound, so taking the larger
    dual value keeps the certificate honest.
    """
    s = v - A @ t
    active = s <= 1e-6 * v
    if not active.any():
        return mu_barrier
    sol, _ = nnls(A[active].T, c / t**2)
    mu = np.zeros_like(mu_barrier)
    mu[active] = sol
    if _dual_value(A, v, c, mu) >= _dual_value(A, v, c, mu_barrier):
        return mu
    return mu_barrier


def _active_set_polish(A, v, c, t, J, iters: int = 20):
    """Newton on the KKT equations with rows ``J`` held tight.

    Returns ``None`` unless the result is primal feasible with non-negative
    multipliers.
    """
    if J.size == 0 or J.size > t.size:
        return None
    mu = np.zeros(A.shape[0])
    mu[J] = nnls(A[J].T, c / t**2)[0]
    AJ, vJ = A[J], v[J]
    x, y = t.copy(), mu[J].copy()
    n, k = t.size, J.size
    for _ in range(iters):
        F = np.concatenate([-c / x**2 + AJ.T @ y, AJ @ x - vJ])
        if np.max(np.abs(F)) < 1e-15 * (1.0 + np.max(c / x**2)):
            break
        K = np.zeros((n + k, n + k))
        K[:n, :n] = np.diag(2.0 * c / x**3)
        K[:n, n:] = AJ.T
        K[n:, :n] = AJ
        try:
            step = np.linalg.solve(K, -F)
        except np.linalg.LinAlgError:
            return None
        x = x + step[:n]
        y = y + step[n:]
        if np.any(x <= 0):
            return None
    if np.any(y < 0) or np.any(A @ x > v * (1 + 1e-12)):
        return None
    full = np.zeros_like(mu)
    full[J] = y
    return x, full


def solve_min_budget(Q: np.ndarray, v: np.ndarray, c: np.ndarray, gap_tol: float = 1e-8, max_newton: int = 200):
    """Minimise sum c_i / t_i s.t. (Q**2) t <= v, t > 0.

    Returns ``(t, mu, info)`` where ``mu`` are the constraint multipliers and
    ``info`` holds the certified relative duality gap and KKT residuals.
    """
    A = np.asarray(Q, dtype=np.float64) ** 2
    v = np.asarray(v, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, n = A.shape
    if np.any(A.sum(axis=0) == 0):
        raise ValueError("every day must appear in some query for the utility-constrained problem")

    # strictly feasible start: every constraint at half its cap
    t = np.full(n, 0.5 * np.min(v / A.sum(axis=1).clip(min=1e-300)))
    f0 = float(np.sum(c / t))
    tau = m / max(f0, 1e-300)
    newton_total = 0
    best = None
    while True:
        for _ in range(max_newton):
            s = v - A @ t
            g = -c / t**2 + (A.T @ (1.0 / s)) / tau
            H = np.diag(2.0 * c / t**3) + (A.T * (1.0 / s**2)) @ A / tau
            try:
                L = np.linalg.cholesky(H)
                dt = -np.linalg.solve(L.T, np.linalg.solve(L, g))
            except np.linalg.LinAlgError:
                dt = -np.linalg.lstsq(H, g, rcond=None)[0]
            lam2 = float(-g @ dt)
            if lam2 / 2.0 <= 1e-14 * (1.0 + abs(float(np.sum(c / t)))):
                break
            step = 1.0
            neg = dt < 0
            if neg.any():
                step = min(step, 0.99 * float(np.min(-t[neg] / dt[neg])))
            Adt = A @ dt
            pos = Adt > 0
            if pos.any():
                step = min(step, 0.99 * float(np.min(s[pos] / Adt[pos])))

            def phi(x):
                sx = v - A @ x
                if np.any(sx <= 0) or np.any(x <= 0):
                    return np.inf
                return np.sum(c / x) - np.sum(np.log(sx)) / tau

            base = phi(t)
            while step > 1e-16 and phi(t + step * dt) > base - 0.25 * step * lam2:
                step *= 0.5
            t = t + step * dt
            newton_total += 1
        s = v - A @ t
        mu = _polish_multipliers(A, v, c, t, 1.0 / (tau * s))
        f = float(np.sum(c / t))
        d = _dual_value(A, v, c, mu)
        gap = (f - d) / f
        if best is None or gap < best[3]:
            best = (t.copy(), mu, f, gap, d)
        # once m / tau is below rounding in the slacks, more centring only adds noise
        if gap <= gap_tol or m / (tau * f) < 1e-13:
            break
        tau *= 20.0
    t, mu, f, gap, d = best
    # guess the active set from the barrier slacks and solve KKT exactly on it
    rel_slack = (v - A @ t) / v
    tried = set()
    for th in 10.0 ** np.arange(-12, -2):
        J = np.flatnonzero(rel_slack <= th)
        key = J.tobytes()
        if key in tried:
            continue
        tried.add(key)
        polished = _active_set_polish(A, v, c, t, J)
        if polished is None:
            continue
        t2, mu2 = polished
        f2 = float(np.sum(c / t2))
        d2 = _dual_value(A, v, c, mu2)
        old = _kkt_report(A, v, c, t, mu)
        new = _kkt_report(A, v, c, t2, mu2)
        if max(new.values()) < max(old.values()) and (f2 - d2) / f2 <= max(gap, 1e-12):
            t, mu, f, d, gap = t2, mu2, f2, d2, (f2 - d2) / f2
    info = {"objective": f, "dual_bound": d, "relative_gap": gap, "newton_steps": newton_total}
    info.update(_kkt_report(A, v, c, t, mu))
    info["kkt_residual"] = max(
        info["stationarity"], info["primal_infeasibility"], info["complementarity"], info["dual_nonneg"]
    )
    return t, mu, info


def init_utility_constrained(
    workload: QueryWorkload, v=None, r_bar=None, rho1: float | None = None
) -> ScalePlan:
    """Cheapest scales meeting per-query variance caps, optionally rescaled to spend ``rho1``.

    Without ``rho1`` the plan's budget is whatever the caps require.  With it,
    every scale is multiplied by one common factor so the plan spends exactly
    ``rho1``.
    """
    Q = workload.Q
    m, n = Q.shape
    v = np.ones(m) if v is None else np.asarray(v, dtype=np.float64)
    r = np.ones(n) if r_bar is None else np.asarray(r_bar, dtype=np.float64)
    if v.shape != (m,) or not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("variance caps must be m positive finite values")
    if r.shape != (n,) or not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise ValueError("r_bar must be n positive finite values")
    t, mu, info = solve_min_budget(Q, v, r**2)
    sigma = np.sqrt(t)
    natural = mechanism_budget(BoundedScales(r, sigma))
    info["natural_rho"] = natural
    info["multipliers"] = mu
    if rho1 is not None:
        rho1 = check_rho(rho1, "rho1")
        sigma = sigma * math.sqrt(natural / rho1)
    else:
        rho1 = natural
    return ScalePlan(sigma, Objective.MIN_BUDGET_UNDER_VARIANCE_CAPS, rho1, r, info)


def rescale(sigma_bar, r_bar, r):
    """Scale noise so that r / sigma is unchanged when the bound moves from r_bar to r."""
    return np.asarray(sigma_bar, dtype=np.float64) / np.asarray(r_bar, dtype=np.float64) * np.asarray(r, dtype=np.float64)
