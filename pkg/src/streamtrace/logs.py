"""Kodi log parsing.

A profile gives the line-prefix grammar of one family of Kodi versions plus
an ordered rule list (first match wins) mapping message bodies to event
categories with named captures. Lines without a prefix are continuation
lines of the event above them.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
from urllib.parse import unquote_plus

from . import resources
from .timestamps import Timestamp, parse_local


class Level(str, Enum):
    DEBUG = "Debug"
    INFO = "Info"
    NOTICE = "Notice"
    WARNING = "Warning"
    ERROR = "Error"
    FATAL = "Fatal"
    UNKNOWN = "Unknown"


class Category(str, Enum):
    SESSION_START = "SessionStart"
    SESSION_STOP = "SessionStop"
    ADDON_INSTALL = "AddonInstall"
    ADDON_UPDATE = "AddonUpdate"
    PLAYBACK_OPEN = "PlaybackOpen"
    SEARCH = "Search"
    ACCOUNT_INFO = "AccountInfo"
    OTHER = "Other"


PREVIOUS_LOG_ABSENT = "previous session log absent"


@dataclass
class _Rule:
    category: Category
    pattern: re.Pattern
    captures: List[str]
    decode: List[str]
    banner: bool


@dataclass
class LogProfile:
    name: str
    prefix: re.Pattern
    levels: Dict[str, Level]
    rules: List[_Rule]

    @classmethod
    def from_dict(cls, d: dict) -> "LogProfile":
        rules = [
            _Rule(Category(r["category"]), re.compile(r["pattern"]), list(r.get("captures", [])),
                  list(r.get("decode", [])), bool(r.get("banner", False)))
            for r in d.get("rules", [])
        ]
        levels = {k.upper(): Level(v) for k, v in d.get("levels", {}).items()}
        return cls(d["name"], re.compile(d["prefix"]), levels, rules)


@dataclass
class LogEvent:
    session_index: int
    raw_line_number: int  # 1-based
    timestamp: Optional[Timestamp]
    level: Level
    category: Category
    message: str
    extracted: Dict[str, str] = field(default_factory=dict)
    continuation_lines: int = 0
    thread: Optional[str] = None
    component: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "session_index": self.session_index,
            "line": self.raw_line_number,
            "timestamp": self.timestamp.to_dict() if self.timestamp else None,
            "level": self.level.value,
            "category": self.category.value,
            "message": self.message,
            "extracted": dict(sorted(self.extracted.items())),
            "continuation_lines": self.continuation_lines,
            "thread": self.thread,
            "component": self.component,
        }


@dataclass
class LogSessionSummary:
    session_index: int
    first_timestamp: Optional[Timestamp] = None
    last_timestamp: Optional[Timestamp] = None
    kodi_version_banner: Optional[str] = None
    event_counts: Dict[str, int] = field(default_factory=dict)
    line_count: int = 0
    profile: Optional[str] = None
    evidence_file: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "session_index": self.session_index,
            "evidence_file": self.evidence_file,
            "profile": self.profile,
            "first_timestamp": self.first_timestamp.to_dict() if self.first_timestamp else None,
            "last_timestamp": self.last_timestamp.to_dict() if self.last_timestamp else None,
            "kodi_version_banner": self.kodi_version_banner,
            "event_counts": dict(sorted(self.event_counts.items())),
            "line_count": self.line_count,
        }


@dataclass
class SessionPairing:
    sessions: List[LogSessionSummary]
    warnings: List[dict] = field(default_factory=list)
    anomalies: List[dict] = field(default_factory=list)


# -- profiles ----------------------------------------------------------------

def load_profiles(data_dir: Optional[Path] = None) -> Dict[str, LogProfile]:
    return {name: LogProfile.from_dict(d) for name, d in resources.log_profiles(data_dir).items()}


def split_lines(data: bytes) -> List[str]:
    """Split on LF (dropping a CR before it); a final terminator adds no empty line."""
    if not data:
        return []
    parts = data.split(b"\n")
    if parts[-1] == b"":
        parts.pop()
    return [p[:-1].decode("utf-8", "surrogateescape") if p.endswith(b"\r")
            else p.decode("utf-8", "surrogateescape") for p in parts]


def detect_profile(lines: Sequence[str], profiles: Dict[str, LogProfile],
                   sample: int = 2000) -> Optional[LogProfile]:
    """The profile whose prefix matches the most lines; ties go to the name sorted first."""
    best, best_hits = None, 0
    head = lines[:sample]
    for name in sorted(profiles):
        prof = profiles[name]
        hits = sum(1 for ln in head if prof.prefix.match(ln))
        if hits > best_hits:
            best, best_hits = prof, hits
    return best


# -- parsing -----------------------------------------------------------------

def _timestamp(m: re.Match) -> Optional[Timestamp]:
    gd = m.groupdict()
    t = gd.get("time")
    if not t:
        return None
    d = gd.get("date")
    return parse_local(f"{d} {t}" if d else t)


def _classify(profile: LogProfile, body: str):
    for rule in profile.rules:
        m = rule.pattern.search(body)
        if m is None:
            continue
        extracted = {}
        for name in rule.captures:
            value = m.groupdict().get(name)
            if value is None:
                continue
            if name in rule.decode:
                extracted[name + "_raw"] = value
                value = unquote_plus(value)
            extracted[name] = value
        return rule, extracted
    return None, {}


def parse_log(data: bytes, session_index: int = 0,
              profile: Union[LogProfile, str, None] = None,
              profiles: Optional[Dict[str, LogProfile]] = None
              ) -> Tuple[List[LogEvent], LogSessionSummary]:
    """One event per prefixed line; continuation lines fold into the event above."""
    lines = split_lines(data)
    if profiles is None:
        profiles = load_profiles()
    if isinstance(profile, str):
        profile = profiles[profile]
    if profile is None:
        profile = detect_profile(lines, profiles)
    events: List[LogEvent] = []
    for number, line in enumerate(lines, 1):
        m = profile.prefix.match(line) if profile is not None else None
        if m is None:
            if events:
                prev = events[-1]
                prev.message += "\n" + line
                prev.continuation_lines += 1
            else:
                events.append(LogEvent(session_index, number, None, Level.UNKNOWN,
                                       Category.OTHER, line))
            continue
        gd = m.groupdict()
        level = profile.levels.get((gd.get("level") or "").upper(), Level.UNKNOWN)
        rule, extracted = _classify(profile, gd.get("body") or "")
        events.append(LogEvent(
            session_index, number, _timestamp(m), level,
            rule.category if rule else Category.OTHER, line, extracted,
            thread=gd.get("thread"), component=gd.get("component"),
        ))
    return events, summarize(events, session_index, len(lines), profile)


def summarize(events: List[LogEvent], session_index: int, line_count: int,
              profile: Optional[LogProfile] = None) -> LogSessionSummary:
    summary = LogSessionSummary(session_index, line_count=line_count,
                                profile=profile.name if profile else None)
    stamps = [e.timestamp for e in events if e.timestamp is not None]
    if stamps:
        summary.first_timestamp = min(stamps, key=lambda t: t.value)
        summary.last_timestamp = max(stamps, key=lambda t: t.value)
    for e in events:
        summary.event_counts[e.category.value] = summary.event_counts.get(e.category.value, 0) + 1
        if e.category is Category.SESSION_START and summary.kodi_version_banner is None:
            summary.kodi_version_banner = e.extracted.get("version") or e.message
    return summary


def pair_sessions(current: Optional[LogSessionSummary],
                  previous: Optional[LogSessionSummary]) -> SessionPairing:
    """Order sessions previous-then-current and flag preservation problems."""
    sessions = [s for s in (previous, current) if s is not None]
    out = SessionPairing(sessions)
    if current is not None and previous is None:
        out.warnings.append({
            "kind": "previous_session_log_absent",
            "message": f"{PREVIOUS_LOG_ABSENT}: starting Kodi after seizure overwrites the "
                       f"older log, so it may have been destroyed",
            "evidence_file": current.evidence_file,
        })
    if previous is not None and current is None:
        out.warnings.append({
            "kind": "current_session_log_absent",
            "message": "current session log absent; only the previous session log was found",
            "evidence_file": previous.evidence_file,
        })
    if current is not None and previous is not None:
        p, c = previous.last_timestamp, current.first_timestamp
        if p is not None and c is not None and p.date_known and c.date_known and p.value > c.value:
            out.anomalies.append({
                "kind": "session_order_anomaly",
                "detail": f"previous log ends at {p.render()} after current log starts at "
                          f"{c.render()} (clock change or swapped files)",
                "evidence_files": [previous.evidence_file, current.evidence_file],
            })
    return out
