"""Merging extracted artifacts into one ordered list of events."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Tuple

from .addons import PackageArtifact
from .kodi_db import AddonRecord, PlaybackRecord, RepoRecord, TextureRecord
from .logs import Category, LogEvent
from .timestamps import Timestamp


class Source(str, Enum):
    ADDONS_DB = "AddonsDb"
    MYVIDEOS_DB = "MyVideosDb"
    TEXTURES_DB = "TexturesDb"
    VIEWMODES_DB = "ViewModesDb"
    LOG_CURRENT = "LogCurrent"
    LOG_PREVIOUS = "LogPrevious"
    PACKAGES_FOLDER = "PackagesFolder"
    ADDON_MANIFEST = "AddonManifest"


_LOG_KINDS = {
    Category.SESSION_START: "session_start",
    Category.SESSION_STOP: "session_stop",
    Category.ADDON_INSTALL: "addon_install_logged",
    Category.ADDON_UPDATE: "addon_update_logged",
    Category.PLAYBACK_OPEN: "video_opened",
    Category.SEARCH: "search",
    Category.ACCOUNT_INFO: "account_info",
}


@dataclass
class TimelineEvent:
    timestamp: Optional[Timestamp]
    source: Source
    event_kind: str
    subject: str
    detail: dict = field(default_factory=dict)
    evidence_file: str = ""
    evidence_sha256: str = ""
    liveness: str = "Live"

    @property
    def dated(self) -> bool:
        return self.timestamp is not None and self.timestamp.date_known

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp.to_dict() if self.timestamp else None,
            "source": self.source.value,
            "event_kind": self.event_kind,
            "subject": self.subject,
            "detail": self.detail,
            "evidence_file": self.evidence_file,
            "evidence_sha256": self.evidence_sha256,
            "liveness": self.liveness,
        }

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=True, separators=(",", ":"))


def sort_key(ev: TimelineEvent) -> Tuple:
    """Dated events first by time; undated ones after, grouped by source.

    The canonical JSON form is the final tie-breaker, so the order is total:
    two events with equal keys are identical.
    """
    if ev.dated:
        return (0, ev.timestamp.value.isoformat(), ev.source.value, ev.subject, ev.event_kind,
                ev.canonical())
    time_of_day = ev.timestamp.value.time().isoformat() if ev.timestamp is not None else ""
    return (1, ev.source.value, time_of_day, ev.subject, ev.event_kind, ev.canonical())


def compare(a: TimelineEvent, b: TimelineEvent) -> int:
    ka, kb = sort_key(a), sort_key(b)
    return (ka > kb) - (ka < kb)


def order_events(events: Iterable[TimelineEvent]) -> List[TimelineEvent]:
    return sorted(events, key=sort_key)


# -- per-artifact event generation ---------------------------------------------

def _ev(ts, source, kind, subject, detail, evidence, liveness="Live") -> TimelineEvent:
    path, sha = evidence
    return TimelineEvent(ts, source, kind, subject, detail, path, sha, liveness)


def addon_events(records: Iterable[AddonRecord], evidence: Tuple[str, str]) -> List[TimelineEvent]:
    out = []
    for r in records:
        detail = {"origin": r.origin, "version": r.version, "enabled": r.enabled}
        fields = (("addon_installed", r.install_date), ("addon_updated", r.last_updated),
                  ("addon_last_used", r.last_used))
        made = False
        for kind, ts in fields:
            if ts is not None:
                out.append(_ev(ts, Source.ADDONS_DB, kind, r.addon_id, detail, evidence, r.liveness.value))
                made = True
        if not made:
            out.append(_ev(None, Source.ADDONS_DB, "addon_recorded", r.addon_id, detail, evidence,
                           r.liveness.value))
    return out


def repo_events(records: Iterable[RepoRecord], evidence: Tuple[str, str]) -> List[TimelineEvent]:
    out = []
    for r in records:
        detail = {"checksum": r.checksum, "version": r.version}
        kind = "repo_checked" if r.last_checked else "repo_recorded"
        out.append(_ev(r.last_checked, Source.ADDONS_DB, kind, r.repo_id, detail, evidence,
                       r.liveness.value))
    return out


def playback_events(records: Iterable[PlaybackRecord], evidence: Tuple[str, str]) -> List[TimelineEvent]:
    out = []
    for r in records:
        subject = r.path + r.file_name if r.path and "://" not in r.file_name else r.file_name
        detail = {"play_count": r.play_count, "source_kind": r.source_kind.value, "path": r.path}
        played = r.last_played is not None or (r.play_count or 0) > 0
        if r.last_played is not None or r.date_added is None:
            out.append(_ev(r.last_played, Source.MYVIDEOS_DB,
                           "video_played" if played else "video_indexed", subject, detail, evidence,
                           r.liveness.value))
        if r.date_added is not None:
            out.append(_ev(r.date_added, Source.MYVIDEOS_DB, "video_added", subject, detail,
                           evidence, r.liveness.value))
    return out


def texture_events(records: Iterable[TextureRecord], evidence: Tuple[str, str]) -> List[TimelineEvent]:
    return [_ev(r.last_used, Source.TEXTURES_DB, "texture_used", r.url,
                {"cached_path": r.cached_path, "use_count": r.use_count}, evidence, r.liveness.value)
            for r in records if r.last_used is not None]


def log_events(events: Iterable[LogEvent], evidence: Tuple[str, str]) -> List[TimelineEvent]:
    out = []
    for e in events:
        kind = _LOG_KINDS.get(e.category)
        if kind is None:
            continue
        source = Source.LOG_PREVIOUS if e.session_index else Source.LOG_CURRENT
        x = e.extracted
        subject = (x.get("url") or x.get("addon_id") or x.get("query") or x.get("version")
                   or x.get("account") or x.get("path") or e.category.value)
        detail = {"line": e.raw_line_number, "level": e.level.value,
                  "extracted": dict(sorted(x.items())), "message": e.message}
        out.append(_ev(e.timestamp, source, kind, subject, detail, evidence))
    return out


def package_events(packages: Iterable[PackageArtifact]) -> List[TimelineEvent]:
    out = []
    for p in packages:
        evidence = (p.relative_path, p.sha256)
        detail = {"implied_version": p.implied_version, "nonstandard_name": p.nonstandard_name,
                  "zip_name": p.zip_name}
        out.append(_ev(p.file_mtime, Source.PACKAGES_FOLDER, "package_downloaded",
                       p.implied_addon_id, detail, evidence))
        if p.zip_internal_times is not None:
            d = dict(detail, earliest_entry=p.zip_internal_times[0].render(), zip_source=p.zip_source)
            out.append(_ev(p.zip_internal_times[1], Source.PACKAGES_FOLDER, "package_entries_written",
                           p.implied_addon_id, d, evidence))
    return out


def build_timeline(*groups: Iterable[TimelineEvent]) -> List[TimelineEvent]:
    """Merge already-generated event groups into the canonical order."""
    merged: List[TimelineEvent] = []
    for g in groups:
        merged.extend(g)
    return order_events(merged)
