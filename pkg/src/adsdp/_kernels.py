"""Hot inner loops over conversion arrays.

Each kernel has a numba ``@njit`` implementation and a pure-numpy one with
identical results.  The numba path is used when numba imports cleanly and
``ADSDP_DISABLE_NUMBA`` is unset (or "0"); the selected backend is exposed as
``BACKEND``.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("ADSDP_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:  # pragma: no cover - exercised implicitly by the import
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def _opts():
    return dict(cache=True, nogil=True, fastmath=False, error_model="numpy")


# --------------------------------------------------------------------------
# rank of each element inside its run of equal keys (keys must be sorted)


def group_rank_numpy(keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys)
    n = keys.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    idx = np.arange(n, dtype=np.int64)
    start = np.empty(n, dtype=bool)
    start[0] = True
    start[1:] = keys[1:] != keys[:-1]
    first = np.where(start, idx, 0)
    np.maximum.accumulate(first, out=first)
    return idx - first


@njit(**_opts())
def _group_rank_jit(keys):
    n = keys.shape[0]
    out = np.empty(n, dtype=np.int64)
    r = 0
    for i in range(n):
        if i > 0 and keys[i] == keys[i - 1]:
            r += 1
        else:
            r = 0
        out[i] = r
    return out


def group_rank_numba(keys: np.ndarray) -> np.ndarray:
    return _group_rank_jit(np.ascontiguousarray(keys, dtype=np.int64))


# --------------------------------------------------------------------------
# run lengths of sorted keys (one entry per run)


def run_lengths_numpy(keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys)
    if keys.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    start = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    return np.diff(np.r_[start, keys.shape[0]]).astype(np.int64)


@njit(**_opts())
def _run_lengths_jit(keys):
    n = keys.shape[0]
    out = np.empty(n, dtype=np.int64)
    m = 0
    for i in range(n):
        if i == 0 or keys[i] != keys[i - 1]:
            out[m] = 1
            m += 1
        else:
            out[m - 1] += 1
    return out[:m].copy()


def run_lengths_numba(keys: np.ndarray) -> np.ndarray:
    return _run_lengths_jit(np.ascontiguousarray(keys, dtype=np.int64))


# --------------------------------------------------------------------------
# per-(day, publisher) sums of entry weights whose conversion survives clipping


def clipped_sums_numpy(
    entry_day: np.ndarray,
    entry_pub: np.ndarray,
    entry_weight: np.ndarray,
    entry_rank: np.ndarray,
    bound: np.ndarray,
    n_days: int,
    n_pub: int,
) -> np.ndarray:
    keep = entry_rank < bound[entry_day]
    flat = entry_day[keep] * n_pub + entry_pub[keep]
    out = np.bincount(flat, weights=entry_weight[keep], minlength=n_days * n_pub)
    return out.reshape(n_days, n_pub)


@njit(**_opts())
def _clipped_sums_jit(entry_day, entry_pub, entry_weight, entry_rank, bound, n_days, n_pub):
    out = np.zeros((n_days, n_pub), dtype=np.float64)
    for e in range(entry_day.shape[0]):
        d = entry_day[e]
        if entry_rank[e] < bound[d]:
            out[d, entry_pub[e]] += entry_weight[e]
    return out


def clipped_sums_numba(entry_day, entry_pub, entry_weight, entry_rank, bound, n_days, n_pub):
    return _clipped_sums_jit(
        np.ascontiguousarray(entry_day, dtype=np.int64),
        np.ascontiguousarray(entry_pub, dtype=np.int64),
        np.ascontiguousarray(entry_weight, dtype=np.float64),
        np.ascontiguousarray(entry_rank, dtype=np.int64),
        np.ascontiguousarray(bound, dtype=np.int64),
        int(n_days),
        int(n_pub),
    )


# --------------------------------------------------------------------------
# number of entries strictly above a real threshold


def count_above_numpy(counts: np.ndarray, tau: float) -> int:
    return int(np.count_nonzero(np.asarray(counts) > tau))


@njit(**_opts())
def _count_above_jit(counts, tau):
    c = 0
    for i in range(counts.shape[0]):
        if counts[i] > tau:
            c += 1
    return c


def count_above_numba(counts: np.ndarray, tau: float) -> int:
    return int(_count_above_jit(np.ascontiguousarray(counts, dtype=np.int64), float(tau)))


if HAVE_NUMBA and not _DISABLED:
    BACKEND = "numba"
    group_rank = group_rank_numba
    run_lengths = run_lengths_numba
    clipped_sums = clipped_sums_numba
    count_above = count_above_numba
else:
    BACKEND = "numpy"
    group_rank = group_rank_numpy
    run_lengths = run_lengths_numpy
    clipped_sums = clipped_sums_numpy
    count_above = count_above_numpy
