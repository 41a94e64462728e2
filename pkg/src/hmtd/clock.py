"""Time model: u32 minute counts since 2000-01-01T00:00Z.

All engine timestamps are integer minutes since the epoch below, which keeps
them small enough for the 4-octet wire slots and makes scripted runs
deterministic. The wall clock is only consulted at the service boundary.
"""

from __future__ import annotations

import re
from datetime import datetime, timedelta, timezone

from .errors import ConfigError

EPOCH = datetime(2000, 1, 1, tzinfo=timezone.utc)
MAX_MINUTES = 2**32 - 1


def minutes_since_epoch(dt: datetime) -> int:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    m = int((dt - EPOCH).total_seconds() // 60)
    if not 0 <= m <= MAX_MINUTES:
        raise ValueError(f"timestamp out of range: {dt.isoformat()}")
    return m


def minutes_to_datetime(minutes: int) -> datetime:
    return EPOCH + timedelta(minutes=int(minutes))


def iso(minutes: int) -> str:
    return minutes_to_datetime(minutes).strftime("%Y-%m-%dT%H:%MZ")


# Default start for fixed clocks: 2025-01-01 08:00 UTC.
DEFAULT_FIXED_START = minutes_since_epoch(datetime(2025, 1, 1, 8, 0, tzinfo=timezone.utc))


class WallClock:
    """Reads the real time, truncated to whole minutes."""

    def now(self) -> int:
        return minutes_since_epoch(datetime.now(timezone.utc))


class FixedClock:
    """Deterministic clock: starts at ``start`` and advances ``step`` per read."""

    def __init__(self, start: int = DEFAULT_FIXED_START, step: int = 1):
        self._next = int(start)
        self._step = int(step)

    def now(self) -> int:
        t = self._next
        self._next += self._step
        return t


_FIXED_RE = re.compile(r"^fixed(?::(\d+))?(?::(\d+))?$")


def parse_clock_spec(spec: str):
    """Build a clock from ``"wall"`` or ``"fixed[:<start-minutes>[:<step>]]"``."""
    if spec == "wall":
        return WallClock()
    m = _FIXED_RE.match(spec)
    if not m:
        raise ConfigError(f"unrecognized clock spec: {spec!r}")
    start = int(m.group(1)) if m.group(1) else DEFAULT_FIXED_START
    step = int(m.group(2)) if m.group(2) else 1
    return FixedClock(start, step)
