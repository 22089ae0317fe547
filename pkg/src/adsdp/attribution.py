"""Attribution models, per-day aggregation, contribution counting and clipping.

Two representations live here.  ``AttributedConversion`` lists are the exact,
record-level form used on small inputs; ``ConversionStream`` is the columnar
form the mechanisms run on, with the same clipping semantics.
"""

from __future__ import annotations

import enum
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .events import DEFAULT_TICKS_PER_DAY, ConversionEvent, Touchpoint


class Model(str, enum.Enum):
    LTA = "LTA"
    FTA = "FTA"
    UNI = "UNI"


@dataclass(frozen=True)
class AttributedConversion:
    user_id: str
    day: int
    weights: Mapping[str, float]
    timestamp: int = 0

    @property
    def total(self) -> float:
        return float(sum(self.weights.values()))


@dataclass(frozen=True)
class PublisherMatrix:
    n: int
    publishers: tuple
    values: np.ndarray

    def column(self, publisher) -> np.ndarray:
        return self.values[:, self.publishers.index(publisher)]


@dataclass(frozen=True)
class ContributionHistogram:
    day: int
    counts: Mapping[str, int] = field(default_factory=dict)

    def values(self) -> np.ndarray:
        return np.fromiter(self.counts.values(), dtype=np.int64, count=len(self.counts))


def attribute(
    touchpoints: Iterable[Touchpoint],
    conversions: Sequence[ConversionEvent],
    model: Model | str,
    ticks_per_day: int = DEFAULT_TICKS_PER_DAY,
) -> list[AttributedConversion]:
    """Split each conversion's unit credit over the impressions that preceded it.

    Returns one record per conversion, in input order.  Conversions without a
    touchpoint get an empty weight map.
    """
    model = Model(model)
    by_conv = defaultdict(list)
    for tp in touchpoints:
        by_conv[id(tp.conversion)].append(tp.impression)

    out = []
    for conv in conversions:
        imps = by_conv.get(id(conv), [])
        weights: dict[str, float] = {}
        if imps:
            # stable sort keeps join order among equal timestamps
            imps = sorted(imps, key=lambda e: e.timestamp)
            if model is Model.LTA:
                weights[imps[-1].publisher_id] = 1.0
            elif model is Model.FTA:
                weights[imps[0].publisher_id] = 1.0
            else:
                share = 1.0 / len(imps)
                for imp in imps:
                    weights[imp.publisher_id] = weights.get(imp.publisher_id, 0.0) + share
        out.append(AttributedConversion(conv.user_id, conv.day(ticks_per_day), weights, conv.timestamp))
    return out


def aggregate(attributed: Iterable[AttributedConversion], n: int, publishers: Sequence) -> PublisherMatrix:
    publishers = tuple(publishers)
    col = {p: j for j, p in enumerate(publishers)}
    values = np.zeros((n, len(publishers)))
    for a in attributed:
        if not 0 <= a.day < n:
            raise IndexError(f"conversion day {a.day} outside [0, {n})")
        for p, w in a.weights.items():
            if p not in col:
                raise KeyError(f"publisher {p!r} not in publisher order")
            values[a.day, col[p]] += w
    return PublisherMatrix(n, publishers, values)


def daily_histogram(attributed: Iterable[AttributedConversion], day: int) -> ContributionHistogram:
    counts = Counter(a.user_id for a in attributed if a.day == day and a.weights)
    return ContributionHistogram(day, dict(counts))


def clip(attributed: Sequence[AttributedConversion], day: int, r: int) -> list[AttributedConversion]:
    """Keep at most the first ``r`` conversions per user on ``day``.

    Records from other days pass through untouched.  Ties in timestamp keep
    input order.  Unattributed conversions are never counted or kept.
    """
    if r < 1:
        raise ValueError("clipping bound must be a positive integer")
    order = sorted(range(len(attributed)), key=lambda i: attributed[i].timestamp)
    seen: Counter = Counter()
    keep = [True] * len(attributed)
    for i in order:
        a = attributed[i]
        if a.day != day:
            continue
        if not a.weights or seen[a.user_id] >= r:
            keep[i] = False
            continue
        seen[a.user_id] += 1
    return [a for a, k in zip(attributed, keep) if k]


# --------------------------------------------------------------------------
# columnar stream


class ConversionStream:
    """Attributed conversions of one campaign in columnar form.

    Conversions are stored sorted by (day, user, time).  Each conversion owns a
    slice ``entry_ptr[c]:entry_ptr[c+1]`` of (publisher, weight) entries whose
    weights sum to at most 1.  Users are dense integer ids; ``user_ids`` maps
    them back to the original identifiers when known.
    """

    def __init__(
        self,
        n_days: int,
        publishers: Sequence,
        user: np.ndarray,
        day: np.ndarray,
        time: np.ndarray,
        entry_ptr: np.ndarray,
        entry_pub: np.ndarray,
        entry_weight: np.ndarray,
        n_users: int | None = None,
        user_ids: Sequence | None = None,
    ):
        user = np.asarray(user, dtype=np.int64)
        day = np.asarray(day, dtype=np.int64)
        time = np.asarray(time, dtype=np.int64)
        entry_ptr = np.asarray(entry_ptr, dtype=np.int64)
        entry_pub = np.asarray(entry_pub, dtype=np.int64)
        entry_weight = np.asarray(entry_weight, dtype=np.float64)
        if not (user.shape == day.shape == time.shape) or entry_ptr.shape[0] != user.shape[0] + 1:
            raise ValueError("inconsistent array lengths")
        if day.size and (day.min() < 0 or day.max() >= n_days):
            raise IndexError("conversion day outside [0, n_days)")
        self.n_days = int(n_days)
        self.publishers = tuple(publishers)
        self.n_users = int(n_users if n_users is not None else (user.max() + 1 if user.size else 0))
        self.user_ids = tuple(user_ids) if user_ids is not None else None

        order = np.lexsort((np.arange(user.size), time, user, day))
        lengths = np.diff(entry_ptr)[order]
        starts = entry_ptr[:-1][order]
        self.user = user[order]
        self.day = day[order]
        self.time = time[order]
        self.entry_ptr = np.r_[0, np.cumsum(lengths)].astype(np.int64)
        idx = (np.repeat(starts, lengths) + _ragged_arange(lengths)).astype(np.int64)
        self.entry_pub = entry_pub[idx]
        self.entry_weight = entry_weight[idx]

    # construction helpers -------------------------------------------------

    @classmethod
    def single_touch(cls, n_days, publishers, user, day, pub, time=None, n_users=None):
        """One full-credit entry per conversion (last-touch synthetic data)."""
        user = np.asarray(user, dtype=np.int64)
        if time is None:
            time = np.arange(user.size, dtype=np.int64)
        return cls(
            n_days,
            publishers,
            user,
            day,
            time,
            np.arange(user.size + 1, dtype=np.int64),
            pub,
            np.ones(user.size),
            n_users=n_users,
        )

    @classmethod
    def from_attributed(
        cls, attributed: Iterable[AttributedConversion], n_days: int, publishers: Sequence
    ) -> "ConversionStream":
        publishers = tuple(publishers)
        col = {p: j for j, p in enumerate(publishers)}
        uid: dict = {}
        user, day, time, ptr, pub, wt = [], [], [], [0], [], []
        for a in attributed:
            if not a.weights:
                continue
            user.append(uid.setdefault(a.user_id, len(uid)))
            day.append(a.day)
            time.append(a.timestamp)
            for p, w in a.weights.items():
                pub.append(col[p])
                wt.append(w)
            ptr.append(len(pub))
        return cls(n_days, publishers, user, day, time, ptr, pub, wt, n_users=len(uid), user_ids=list(uid))

    # sizes ----------------------------------------------------------------

    @property
    def n_conversions(self) -> int:
        return int(self.user.size)

    @property
    def n_publishers(self) -> int:
        return len(self.publishers)

    # derived columns --------------------------------------------------------

    @cached_property
    def entry_conv(self) -> np.ndarray:
        return np.repeat(np.arange(self.user.size, dtype=np.int64), np.diff(self.entry_ptr))

    @cached_property
    def entry_day(self) -> np.ndarray:
        return self.day[self.entry_conv]

    @cached_property
    def day_ptr(self) -> np.ndarray:
        return np.searchsorted(self.day, np.arange(self.n_days + 1)).astype(np.int64)

    @cached_property
    def day_rank(self) -> np.ndarray:
        """Position of each conversion among its user's conversions that day."""
        return _kernels.group_rank(self.day * max(self.n_users, 1) + self.user)

    @cached_property
    def user_rank(self) -> np.ndarray:
        """Position of each conversion among all of its user's conversions."""
        order = np.lexsort((np.arange(self.user.size), self.time, self.day, self.user))
        ranks = np.empty(self.user.size, dtype=np.int64)
        ranks[order] = _kernels.group_rank(self.user[order])
        return ranks

    @cached_property
    def _day_counts(self) -> list:
        out = []
        for i in range(self.n_days):
            lo, hi = self.day_ptr[i], self.day_ptr[i + 1]
            out.append(_kernels.run_lengths(self.user[lo:hi]))
        return out

    def day_counts(self, day: int) -> np.ndarray:
        """Conversions per active user on ``day`` (one entry per user)."""
        return self._day_counts[day]

    def user_totals(self) -> np.ndarray:
        return np.bincount(self.user, minlength=self.n_users)

    # aggregation ----------------------------------------------------------

    def matrix(self) -> np.ndarray:
        return self._sums(self.day_rank, np.full(self.n_days, np.iinfo(np.int64).max))

    def clipped_matrix(self, bounds) -> np.ndarray:
        """Per-(day, publisher) sums keeping each user's first ``bounds[day]`` conversions that day."""
        return self._sums(self.day_rank, _as_bounds(bounds, self.n_days))

    def clipped_row(self, day: int, bound: float) -> np.ndarray:
        """Day ``day``'s publisher sums with each user limited to ``bound`` conversions."""
        c0, c1 = self.day_ptr[day], self.day_ptr[day + 1]
        e0, e1 = self.entry_ptr[c0], self.entry_ptr[c1]
        keep = self.day_rank[self.entry_conv[e0:e1]] < bound
        return np.bincount(
            self.entry_pub[e0:e1][keep],
            weights=self.entry_weight[e0:e1][keep],
            minlength=self.n_publishers,
        ).astype(np.float64)

    def globally_clipped_matrix(self, limits) -> np.ndarray:
        """Sums keeping, on day i, only conversions within each user's first ``limits[i]`` overall."""
        return self._sums(self.user_rank, _as_bounds(limits, self.n_days))

    def _sums(self, conv_rank: np.ndarray, bounds: np.ndarray) -> np.ndarray:
        return _kernels.clipped_sums(
            self.entry_day,
            self.entry_pub,
            self.entry_weight,
            conv_rank[self.entry_conv],
            bounds,
            self.n_days,
            self.n_publishers,
        )

    def first_day_exceeding(self, tau: int) -> np.ndarray:
        """Day on which each user's total passes ``tau`` (users who never do are omitted)."""
        return self.day[self.user_rank == int(tau)]

    # slicing ----------------------------------------------------------------

    def with_days(self, mask_fn) -> "ConversionStream":
        """Copy keeping conversions whose day satisfies ``mask_fn(day_array)``."""
        keep = mask_fn(self.day)
        lengths = np.diff(self.entry_ptr)[keep]
        sel = np.repeat(keep, np.diff(self.entry_ptr))
        return ConversionStream(
            self.n_days,
            self.publishers,
            self.user[keep],
            self.day[keep],
            self.time[keep],
            np.r_[0, np.cumsum(lengths)],
            self.entry_pub[sel],
            self.entry_weight[sel],
            n_users=self.n_users,
            user_ids=self.user_ids,
        )

    def to_attributed(self) -> list[AttributedConversion]:
        names = self.user_ids or tuple(f"u{i}" for i in range(self.n_users))
        out = []
        for c in range(self.n_conversions):
            lo, hi = self.entry_ptr[c], self.entry_ptr[c + 1]
            w: dict = {}
            for p, x in zip(self.entry_pub[lo:hi], self.entry_weight[lo:hi]):
                w[self.publishers[p]] = w.get(self.publishers[p], 0.0) + float(x)
            out.append(AttributedConversion(names[self.user[c]], int(self.day[c]), w, int(self.time[c])))
        return out


def _ragged_arange(lengths: np.ndarray) -> np.ndarray:
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    ends = np.cumsum(lengths)
    offs = np.repeat(ends - lengths, lengths)
    return np.arange(total, dtype=np.int64) - offs


def _as_bounds(bounds, n: int) -> np.ndarray:
    b = np.asarray(bounds, dtype=np.float64)
    if b.ndim == 0:
        b = np.full(n, float(b))
    if b.shape != (n,):
        raise ValueError(f"expected {n} bounds, got shape {b.shape}")
    big = float(np.iinfo(np.int64).max // 2)
    return np.minimum(np.ceil(b), big).astype(np.int64)
