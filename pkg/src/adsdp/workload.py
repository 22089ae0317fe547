"""Linear query workloads and the two error metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_WINDOW = 7


@dataclass(frozen=True)
class QueryWorkload:
    Q: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=np.float64))
        g = np.asarray(self.gamma, dtype=np.float64).reshape(-1)
        if Q.shape[0] < 1 or g.shape[0] != Q.shape[0]:
            raise ValueError("workload needs m >= 1 rows and one weight per row")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(g))):
            raise ValueError("workload entries must be finite")
        if np.any(g <= 0):
            raise ValueError("query weights must be positive")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "gamma", g)

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    @property
    def n(self) -> int:
        return self.Q.shape[1]

    def last_day(self) -> np.ndarray:
        """Index of the last day each query touches (-1 for an all-zero row)."""
        nz = self.Q != 0
        last = self.n - 1 - np.argmax(nz[:, ::-1], axis=1)
        return np.where(nz.any(axis=1), last, -1)

    def answer(self, X: np.ndarray) -> np.ndarray:
        return self.Q @ X

    def with_gamma(self, gamma) -> "QueryWorkload":
        return QueryWorkload(self.Q, gamma)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["gamma"] + [f"d{i}" for i in range(self.n)])
            for g, row in zip(self.gamma, self.Q):
                w.writerow([repr(float(g))] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "QueryWorkload":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        arr = np.array([[float(v) for v in r] for r in rows])
        return cls(arr[:, 1:], arr[:, 0])


def prefix_sum_workload(n: int, gamma: Sequence[float] | None = None) -> QueryWorkload:
    if n < 1:
        raise ValueError("n must be >= 1")
    return QueryWorkload(np.tril(np.ones((n, n))), np.ones(n) if gamma is None else gamma)


def sliding_window_workload(n: int, K: int = DEFAULT_WINDOW, gamma: Sequence[float] | None = None) -> QueryWorkload:
    if n < 1 or K < 1:
        raise ValueError("n and K must be >= 1")
    i = np.arange(n)[:, None]
    t = np.arange(n)[None, :]
    Q = ((t <= i) & (t > i - K)).astype(np.float64)
    return QueryWorkload(Q, np.ones(n) if gamma is None else gamma)


def weighted_last_gamma(n: int, last: float = 7.0) -> np.ndarray:
    """Unit weights with a heavier final query."""
    g = np.ones(n)
    g[-1] = last
    return g


def query_variance(q, sigma) -> float:
    q = np.asarray(q, dtype=np.float64)
    s = np.asarray(sigma, dtype=np.float64)
    return float(np.sum(q**2 * s**2))


@dataclass(frozen=True)
class AnswerSet:
    estimates: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.estimates, dtype=np.float64)
        t = np.asarray(self.truth, dtype=np.float64)
        if e.shape != t.shape:
            raise ValueError("estimates and truth differ in shape")
        object.__setattr__(self, "estimates", e)
        object.__setattr__(self, "truth", t)

    @property
    def errors(self) -> np.ndarray:
        return self.estimates - self.truth


def wrmse(ans: AnswerSet, gamma) -> float:
    """Weighted RMSE; rows are queries, any trailing axes (publishers) are averaged."""
    g2 = np.asarray(gamma, dtype=np.float64) ** 2
    err2 = ans.errors**2
    if err2.shape[0] != g2.shape[0]:
        raise ValueError("one weight per query row required")
    err2 = err2.reshape(err2.shape[0], -1)
    num = np.sum(g2[:, None] * err2)
    den = np.sum(g2) * err2.shape[1]
    return float(np.sqrt(num / den))


def max_mse(trials: Sequence[AnswerSet]) -> float:
    """Largest per-query mean squared error across trials."""
    if len(trials) == 0:
        raise ValueError("need at least one trial")
    err2 = np.stack([a.errors**2 for a in trials])
    return float(np.max(err2.mean(axis=0)))
