"""Synthetic conversion streams.

Every family draws a per-user total conversion count, then scatters each
conversion onto a uniformly random day and publisher with full single-touch
credit.  ``criteo_like`` and ``facebook_like`` are shape stand-ins matched
to published summary statistics (user count, total, cap), not the real data.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .attribution import ConversionStream, Model, attribute
from .events import (
    DEFAULT_TICKS_PER_DAY,
    ConversionEvent,
    ImpressionEvent,
    join,
    load_conversions,
    load_impressions,
    write_conversions,
    write_impressions,
)


class Family(str, enum.Enum):
    ZIPF = "zipf"
    NORMAL = "normal"
    UNIFORM = "uniform"
    CRITEO_LIKE = "criteo_like"
    FACEBOOK_LIKE = "facebook_like"


# per-family cap on a user's total conversions
GLOBAL_CAP = {
    Family.ZIPF: 50,
    Family.NORMAL: 150,
    Family.UNIFORM: 256,
    Family.CRITEO_LIKE: 44,
    Family.FACEBOOK_LIKE: 60,
}

# defaults at full scale: (users, publishers)
FULL_SCALE = {
    Family.ZIPF: (1_000_000, 1000),
    Family.NORMAL: (1_000_000, 1000),
    Family.UNIFORM: (1_000_000, 1000),
    Family.CRITEO_LIKE: (1_608_081, 287),
    Family.FACEBOOK_LIKE: (1143, 1),
}

# target mean conversions per user for the power-law stand-ins
_TARGET_MEAN = {
    Family.CRITEO_LIKE: 1_732_721 / 1_608_081,
    Family.FACEBOOK_LIKE: 3264 / 1143,
}


@dataclass(frozen=True)
class SynthSpec:
    family: Family
    n_users: int
    n_publishers: int
    n_days: int = 31
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.n_users < 0 or self.n_publishers < 1 or self.n_days < 1:
            raise ValueError("need n_users >= 0, n_publishers >= 1 and n_days >= 1")

    @property
    def cap(self) -> int:
        return GLOBAL_CAP[self.family]

    @classmethod
    def full_scale(cls, family, n_days: int = 31, seed: int = 0) -> "SynthSpec":
        users, pubs = FULL_SCALE[Family(family)]
        return cls(Family(family), users, pubs, n_days, seed)


def scale_down(spec: SynthSpec, factor: int) -> SynthSpec:
    """Divide users and publishers by ``factor`` (at least one of each).

    Absolute errors change with scale; comparisons between methods are what
    survive the reduction.
    """
    if int(factor) != factor or factor < 1:
        raise ValueError("factor must be a positive integer")
    return replace(
        spec,
        n_users=max(1, spec.n_users // factor),
        n_publishers=max(1, spec.n_publishers // factor),
    )


def _power_law_mean(s: float, cap: int) -> float:
    v = np.arange(1, cap + 1, dtype=np.float64)
    w = v**-s
    return float(np.sum(v * w) / np.sum(w))


@lru_cache(maxsize=None)
def power_law_exponent(family: Family) -> float:
    """Exponent of P(v) ~ v**-s on {1..cap} whose mean hits the family's target."""
    cap = GLOBAL_CAP[family]
    target = _TARGET_MEAN[family]
    return brentq(lambda s: _power_law_mean(s, cap) - target, 1.01, 50.0, xtol=1e-12)


def draw_totals(family: Family, n_users: int, rng: np.random.Generator) -> np.ndarray:
    family = Family(family)
    cap = GLOBAL_CAP[family]
    if family is Family.ZIPF:
        # support {1, 2, ...} with P(v) ~ v**-3, shifted by 10
        t = rng.zipf(3.0, size=n_users) + 10
    elif family is Family.NORMAL:
        t = np.rint(rng.normal(50.0, 30.0, size=n_users))
    elif family is Family.UNIFORM:
        t = rng.integers(1, 257, size=n_users)
    else:
        s = power_law_exponent(family)
        v = np.arange(1, cap + 1)
        p = v.astype(np.float64) ** -s
        t = rng.choice(v, size=n_users, p=p / p.sum())
    return np.clip(t, 0, cap).astype(np.int64)


def generate(spec: SynthSpec) -> ConversionStream:
    rng = np.random.default_rng(spec.seed)
    totals = draw_totals(spec.family, spec.n_users, rng)
    user = np.repeat(np.arange(spec.n_users, dtype=np.int64), totals)
    day = rng.integers(0, spec.n_days, size=user.size)
    pub = rng.integers(0, spec.n_publishers, size=user.size)
    publishers = [f"P{j}" for j in range(spec.n_publishers)]
    return ConversionStream.single_touch(spec.n_days, publishers, user, day, pub, n_users=spec.n_users)


# --------------------------------------------------------------------------
# event CSVs, so generated data can go through ingestion and the join


def to_events(stream: ConversionStream, ticks_per_day: int = DEFAULT_TICKS_PER_DAY, advertiser: str = "Ad-1"):
    """One impression per credited publisher, two ticks before its conversion."""
    if ticks_per_day < 3:
        raise ValueError("ticks_per_day must be at least 3")
    names = stream.user_ids or tuple(f"u{i}" for i in range(stream.n_users))
    # spread a user's same-day conversions over distinct ticks
    slot = np.asarray(stream.day_rank) % (ticks_per_day // 2 - 1)
    imps, convs = [], []
    for c in range(stream.n_conversions):
        u = names[stream.user[c]]
        t = int(stream.day[c]) * ticks_per_day + 2 * int(slot[c]) + 2
        for e in range(stream.entry_ptr[c], stream.entry_ptr[c + 1]):
            imps.append(ImpressionEvent(u, stream.publishers[stream.entry_pub[e]], advertiser, t - 1))
        convs.append(ConversionEvent(u, advertiser, t, 1.0))
    return imps, convs


def write_csv(stream: ConversionStream, out_dir, ticks_per_day: int = DEFAULT_TICKS_PER_DAY) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    imps, convs = to_events(stream, ticks_per_day)
    write_impressions(out / "impressions.csv", imps)
    write_conversions(out / "conversions.csv", convs)
    meta = {
        "ticks_per_day": ticks_per_day,
        "n_days": stream.n_days,
        "publishers": list(stream.publishers),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return out


def read_csv(in_dir, model: Model = Model.LTA) -> ConversionStream:
    """Load a directory written by :func:`write_csv` through the join and attribution."""
    d = Path(in_dir)
    meta = json.loads((d / "meta.json").read_text())
    imps = load_impressions(d / "impressions.csv")
    convs = load_conversions(d / "conversions.csv")
    tps = join(imps, convs)
    attributed = attribute(tps, convs, Model(model), meta["ticks_per_day"])
    return ConversionStream.from_attributed(attributed, meta["n_days"], meta["publishers"])
