"""Timestamp helpers.

All timestamps inside the system are integer nanoseconds since the Unix
epoch, UTC.  RFC3339 strings appear only at the edges (parsers, exports,
the SensorThings serialization).  datetime only has microsecond
resolution, so parsing and formatting of the fractional part is done by
hand to keep full nanosecond round-trips.
"""

from __future__ import annotations

import re
import time
from datetime import datetime, timedelta, timezone

NS_PER_SECOND = 1_000_000_000
NS_PER_MILLI = 1_000_000

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

_RFC3339_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[Tt ]"
    r"(\d{2}):(\d{2}):(\d{2})"
    r"(?:\.(\d{1,9}))?"
    r"(?:[Zz]|([+-])(\d{2}):(\d{2}))$"
)

_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(ns|us|ms|s|min|m|h|d)\s*$")

_DURATION_UNITS_NS = {
    "ns": 1,
    "us": 1_000,
    "ms": 1_000_000,
    "s": NS_PER_SECOND,
    "m": 60 * NS_PER_SECOND,
    "min": 60 * NS_PER_SECOND,
    "h": 3600 * NS_PER_SECOND,
    "d": 86400 * NS_PER_SECOND,
}


def now_ns() -> int:
    return time.time_ns()


def parse_rfc3339_ns(value: str) -> int:
    """Parse an RFC3339 timestamp into integer nanoseconds UTC.

    Accepts 'Z' or a numeric offset, and up to nine fractional digits.
    Raises ValueError on anything else.
    """
    m = _RFC3339_RE.match(value)
    if m is None:
        raise ValueError(f"not an RFC3339 timestamp: {value!r}")
    year, month, day, hour, minute, second = (int(m.group(i)) for i in range(1, 7))
    dt = datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)
    ns = int((dt - _EPOCH).total_seconds()) * NS_PER_SECOND
    frac = m.group(7)
    if frac:
        ns += int(frac.ljust(9, "0"))
    if m.group(8):
        offset = int(m.group(9)) * 3600 + int(m.group(10)) * 60
        if m.group(8) == "+":
            ns -= offset * NS_PER_SECOND
        else:
            ns += offset * NS_PER_SECOND
    return ns


def format_rfc3339_ns(ns: int) -> str:
    """Format nanoseconds UTC as RFC3339 with 'Z'.

    The fraction is emitted with 3, 6 or 9 digits, whichever is the
    shortest exact representation; whole seconds carry no fraction.
    """
    seconds, frac = divmod(ns, NS_PER_SECOND)
    dt = _EPOCH + timedelta(seconds=seconds)
    base = dt.strftime("%Y-%m-%dT%H:%M:%S")
    if frac == 0:
        return base + "Z"
    if frac % 1_000_000 == 0:
        return f"{base}.{frac // 1_000_000:03d}Z"
    if frac % 1_000 == 0:
        return f"{base}.{frac // 1_000:06d}Z"
    return f"{base}.{frac:09d}Z"


def parse_duration_ns(value) -> int:
    """Parse a duration like '10s', '500ms', '5min', '2h', '1d' into ns.

    Bare numbers are rejected: a unit is always required so configs stay
    unambiguous.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        raise ValueError(f"duration needs a unit, got bare number {value!r}")
    m = _DURATION_RE.match(str(value))
    if m is None:
        raise ValueError(f"not a duration: {value!r}")
    ns = float(m.group(1)) * _DURATION_UNITS_NS[m.group(2)]
    if ns <= 0:
        raise ValueError(f"duration must be positive: {value!r}")
    return int(ns)
