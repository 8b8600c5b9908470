"""Timestamp handling.

Evidence clocks are untrusted, so device-recorded times are kept as naive
local values and rendered with a trailing ``?``. Filesystem times taken from
the mounted tree are the only values rendered as UTC.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, datetime, time, timezone
from enum import Enum
from typing import Optional


class ClockTrust(str, Enum):
    LOCAL_UNTRUSTED = "LocalUntrusted"
    FILESYSTEM_UTC = "FilesystemUTC"


_DATETIME_RE = re.compile(
    r"^\s*(?P<date>\d{4}-\d{2}-\d{2})"
    r"(?:[ T](?P<time>\d{2}:\d{2}(?::\d{2})?(?:[.,]\d{1,6})?))?\s*$"
)
_TIME_RE = re.compile(r"^\s*(?P<time>\d{2}:\d{2}:\d{2}(?:[.,]\d{1,6})?)\s*$")


@dataclass(frozen=True)
class Timestamp:
    """A point in time together with how far it can be trusted.

    ``value`` is naive. ``date_known`` is False for time-of-day-only log
    prefixes, in which case only ``value.time()`` is meaningful.
    """

    value: datetime
    trust: ClockTrust = ClockTrust.LOCAL_UNTRUSTED
    date_known: bool = True
    raw: Optional[str] = None

    def render(self) -> str:
        if not self.date_known:
            return "T" + _fmt_time(self.value.time()) + "?"
        text = self.value.date().isoformat() + "T" + _fmt_time(self.value.time())
        if self.trust is ClockTrust.FILESYSTEM_UTC:
            return text + "Z"
        return text + "?"

    @property
    def sortable(self) -> bool:
        return self.date_known

    def to_dict(self) -> dict:
        return {"value": self.render(), "clock": self.trust.value, "raw": self.raw}


def _fmt_time(t: time) -> str:
    text = t.strftime("%H:%M:%S")
    if t.microsecond:
        text += ".%06d" % t.microsecond
    return text


def _parse_time(text: str) -> time:
    text = text.replace(",", ".")
    frac = 0
    if "." in text:
        text, digits = text.split(".", 1)
        frac = int(digits.ljust(6, "0")[:6])
    parts = [int(p) for p in text.split(":")]
    while len(parts) < 3:
        parts.append(0)
    return time(parts[0], parts[1], parts[2], frac)


def parse_local(text) -> Optional[Timestamp]:
    """Parse a device-recorded ``YYYY-MM-DD HH:MM:SS`` style value.

    Returns None for empty or unparseable input; the raw text is kept on
    success so reports can show exactly what was stored.
    """
    if text is None:
        return None
    if not isinstance(text, str):
        text = str(text)
    m = _DATETIME_RE.match(text)
    try:
        if m:
            d = date.fromisoformat(m.group("date"))
            t = _parse_time(m.group("time")) if m.group("time") else time(0)
            return Timestamp(datetime.combine(d, t), raw=text)
        m = _TIME_RE.match(text)
        if m:
            t = _parse_time(m.group("time"))
            return Timestamp(datetime.combine(date(1900, 1, 1), t), date_known=False, raw=text)
    except ValueError:
        return None
    return None


def from_epoch_utc(epoch: float) -> Timestamp:
    dt = datetime.fromtimestamp(epoch, tz=timezone.utc).replace(tzinfo=None)
    return Timestamp(dt, trust=ClockTrust.FILESYSTEM_UTC, raw=None)


def rfc3339_utc(dt: datetime) -> str:
    """Render an aware or UTC-naive datetime as ``YYYY-MM-DDTHH:MM:SSZ``."""
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return dt.replace(microsecond=0).isoformat() + "Z"


def parse_rfc3339_utc(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)
