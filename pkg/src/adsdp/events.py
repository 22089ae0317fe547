"""Raw impression/conversion records, CSV ingestion and the attribution join."""

from __future__ import annotations

import csv
import enum
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

IMPRESSION_HEADER = ("user_id", "publisher_id", "advertiser_id", "timestamp", "interaction")
CONVERSION_HEADER = ("user_id", "advertiser_id", "timestamp", "value")

DEFAULT_TICKS_PER_DAY = 86_400


class EventError(ValueError):
    """Base class for ingestion failures."""


class ParseError(EventError):
    def __init__(self, path, line: int, msg: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {msg}")


class ValidationError(EventError):
    pass


class Interaction(str, enum.Enum):
    VIEW = "view"
    CLICK = "click"


@dataclass(frozen=True, eq=False)
class ImpressionEvent:
    user_id: str
    publisher_id: str
    advertiser_id: str
    timestamp: int
    interaction: Interaction = Interaction.VIEW

    def __post_init__(self):
        _check_ids(self.user_id, self.publisher_id, self.advertiser_id)
        _check_time(self.timestamp)

    def day(self, ticks_per_day: int = DEFAULT_TICKS_PER_DAY) -> int:
        return self.timestamp // ticks_per_day


@dataclass(frozen=True, eq=False)
class ConversionEvent:
    user_id: str
    advertiser_id: str
    timestamp: int
    value: float = 0.0

    def __post_init__(self):
        _check_ids(self.user_id, self.advertiser_id)
        _check_time(self.timestamp)
        if not self.value >= 0:
            raise ValidationError(f"conversion value must be non-negative, got {self.value}")

    def day(self, ticks_per_day: int = DEFAULT_TICKS_PER_DAY) -> int:
        return self.timestamp // ticks_per_day


# Events compare by identity: two identical CSV rows are two conversions.


@dataclass(frozen=True)
class Touchpoint:
    conversion: ConversionEvent
    impression: ImpressionEvent


def _check_ids(*ids: str) -> None:
    for v in ids:
        if not isinstance(v, str) or not v:
            raise ValidationError("identifiers must be non-empty strings")


def _check_time(t: int) -> None:
    if t < 0:
        raise ValidationError(f"timestamp must be >= 0, got {t}")


def _read_rows(path, header: Sequence[str]):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "missing header") from None
        if tuple(c.strip() for c in first) != tuple(header):
            raise ParseError(path, 1, f"expected header {','.join(header)}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(path, reader.line_num, f"expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, row


def _parse_int(path, line, s):
    try:
        return int(s)
    except ValueError:
        raise ParseError(path, line, f"bad integer {s!r}") from None


def load_impressions(path) -> list[ImpressionEvent]:
    out = []
    for line, (user, pub, adv, ts, inter) in _read_rows(path, IMPRESSION_HEADER):
        t = _parse_int(path, line, ts)
        try:
            kind = Interaction(inter.strip().lower())
        except ValueError:
            raise ParseError(path, line, f"unknown interaction {inter!r}") from None
        try:
            out.append(ImpressionEvent(user, pub, adv, t, kind))
        except ValidationError as exc:
            raise ValidationError(f"{path}:{line}: {exc}") from None
    return out


def load_conversions(path) -> list[ConversionEvent]:
    out = []
    for line, (user, adv, ts, val) in _read_rows(path, CONVERSION_HEADER):
        t = _parse_int(path, line, ts)
        try:
            v = float(val)
        except ValueError:
            raise ParseError(path, line, f"bad value {val!r}") from None
        try:
            out.append(ConversionEvent(user, adv, t, v))
        except ValidationError as exc:
            raise ValidationError(f"{path}:{line}: {exc}") from None
    return out


def write_impressions(path, impressions: Iterable[ImpressionEvent]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(IMPRESSION_HEADER)
        for e in impressions:
            w.writerow((e.user_id, e.publisher_id, e.advertiser_id, e.timestamp, e.interaction.value))


def write_conversions(path, conversions: Iterable[ConversionEvent]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CONVERSION_HEADER)
        for c in conversions:
            w.writerow((c.user_id, c.advertiser_id, c.timestamp, repr(float(c.value))))


def _imp_key(imp: ImpressionEvent):
    return (imp.timestamp, imp.publisher_id, imp.interaction.value)


def _conv_key(conv: ConversionEvent):
    return (conv.timestamp, conv.user_id, conv.advertiser_id, conv.value)


def join(
    impressions: Sequence[ImpressionEvent], conversions: Sequence[ConversionEvent]
) -> list[Touchpoint]:
    """Pair every conversion with each earlier impression of the same user and advertiser.

    Output is ordered by conversion timestamp, then impression timestamp; the
    remaining record fields break ties, so the order is the same for any
    permutation of the inputs.
    """
    by_key = defaultdict(list)
    for imp in impressions:
        by_key[(imp.user_id, imp.advertiser_id)].append(imp)
    for lst in by_key.values():
        lst.sort(key=_imp_key)

    out = []
    for conv in sorted(conversions, key=_conv_key):
        for imp in by_key.get((conv.user_id, conv.advertiser_id), ()):
            if imp.timestamp >= conv.timestamp:
                break
            out.append(Touchpoint(conv, imp))
    return out
