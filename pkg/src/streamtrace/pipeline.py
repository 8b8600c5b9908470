"""Running every extractor over every discovered installation."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import __version__, kodi_db
from .addons import (AddonInventory, PackageArtifact, cross_reference, inspect_packages,
                     inventory_addons)
from .errors import FileTooLarge, NoRecognizedTables, SqliteFormatError
from .evidence import EvidenceSource
from .locator import DatabaseFile, KodiInstallation, LogFile, Role, scan
from .logs import LogEvent, LogProfile, LogSessionSummary, load_profiles, pair_sessions, parse_log
from .report import EvidenceReport
from .sqlite.format import Liveness, SqliteDatabase
from .timeline import (Source, TimelineEvent, addon_events, build_timeline, log_events,
                       package_events, playback_events, repo_events, texture_events)
from .timestamps import from_epoch_utc, rfc3339_utc

log = logging.getLogger("streamtrace")

SIDECAR_WARNING = "sidecar present; its frames are not merged into the parsed database"


@dataclass
class RunConfig:
    root: Path
    case_id: str = ""
    examiner: str = ""
    include_carved: bool = True
    formats: List[str] = field(default_factory=lambda: ["json"])
    output_dir: Optional[Path] = None
    profiles_dir: Optional[Path] = None
    fixed_clock: Optional[datetime] = None
    raw_tables: bool = False
    workers: int = 4


@dataclass
class DatabaseResult:
    file: DatabaseFile
    sha256: str
    header: Optional[dict] = None
    addons: List[kodi_db.AddonRecord] = field(default_factory=list)
    repos: List[kodi_db.RepoRecord] = field(default_factory=list)
    playback: List[kodi_db.PlaybackRecord] = field(default_factory=list)
    textures: List[kodi_db.TextureRecord] = field(default_factory=list)
    usage: List[kodi_db.UsageRecord] = field(default_factory=list)
    raw_rows: List[kodi_db.UsageRecord] = field(default_factory=list)
    carved_count: int = 0
    page_map: Dict[str, int] = field(default_factory=dict)
    anomalies: List[dict] = field(default_factory=list)
    warnings: List[dict] = field(default_factory=list)

    @property
    def evidence(self) -> Tuple[str, str]:
        return self.file.relative_path, self.sha256

    def to_dict(self) -> dict:
        return {
            "database": self.file.to_dict(),
            "sha256": self.sha256,
            "header": self.header,
            "page_map": self.page_map,
            "carved_records": self.carved_count,
            "addons": [r.to_dict() for r in self.addons],
            "repos": [r.to_dict() for r in self.repos],
            "playback": [r.to_dict() for r in self.playback],
            "textures": [r.to_dict() for r in self.textures],
            "usage": [r.to_dict() for r in self.usage],
            "raw_rows": [r.to_dict() for r in self.raw_rows],
            "anomalies": self.anomalies,
            "warnings": self.warnings,
        }


@dataclass
class LogResult:
    file: LogFile
    sha256: str
    events: List[LogEvent]
    summary: LogSessionSummary

    def to_dict(self) -> dict:
        return {"log": self.file.to_dict(), "sha256": self.sha256,
                "summary": self.summary.to_dict(), "events": [e.to_dict() for e in self.events]}


@dataclass
class InstallationArtifacts:
    installation: KodiInstallation
    databases: List[DatabaseResult] = field(default_factory=list)
    logs: List[LogResult] = field(default_factory=list)
    sessions: List[dict] = field(default_factory=list)
    inventory: Optional[AddonInventory] = None
    packages: List[PackageArtifact] = field(default_factory=list)
    discrepancies: List[dict] = field(default_factory=list)
    warnings: List[dict] = field(default_factory=list)
    anomalies: List[dict] = field(default_factory=list)
    events: List[TimelineEvent] = field(default_factory=list)

    def to_dict(self) -> dict:
        inv = self.inventory
        return {
            "installation": self.installation.to_dict(),
            "databases": [d.to_dict() for d in self.databases],
            "logs": [lg.to_dict() for lg in self.logs],
            "sessions": self.sessions,
            "addon_manifests": [m.to_dict() for m in inv.manifests] if inv else [],
            "addon_dir_anomalies": inv.anomalies if inv else [],
            "packages": [p.to_dict() for p in self.packages],
            "discrepancies": self.discrepancies,
            "warnings": self.warnings,
            "anomalies": self.anomalies,
        }

    def summary(self) -> dict:
        d = self.installation.to_dict()
        d["counts"] = {
            "addons": sum(len(x.addons) for x in self.databases),
            "repos": sum(len(x.repos) for x in self.databases),
            "playback": sum(len(x.playback) for x in self.databases),
            "textures": sum(len(x.textures) for x in self.databases),
            "carved_records": sum(x.carved_count for x in self.databases),
            "log_events": sum(len(x.events) for x in self.logs),
            "addon_manifests": len(self.inventory.manifests) if self.inventory else 0,
            "packages": len(self.packages),
            "timeline_events": len(self.events),
        }
        return d


def _open_db(source: EvidenceSource, rel: str) -> Tuple[SqliteDatabase, str]:
    try:
        data = source.read_file(rel)
        return SqliteDatabase(data, rel), source.manifest_entry(rel).sha256
    except FileTooLarge:
        reader = source.open_reader(rel)
        return SqliteDatabase(reader, rel), source.manifest_entry(rel).sha256


def process_database(source: EvidenceSource, dbf: DatabaseFile, config: RunConfig,
                     column_map: Optional[dict] = None) -> DatabaseResult:
    rel = dbf.relative_path
    for side in dbf.sidecars:
        source.hash_file(side)
    try:
        db, sha = _open_db(source, rel)
    except SqliteFormatError as exc:
        sha = source.hash_file(rel).sha256
        res = DatabaseResult(dbf, sha)
        res.anomalies.append({"db_path": rel, "page": None, "kind": "unparseable", "detail": str(exc)})
        return res
    res = DatabaseResult(dbf, sha, header=db.header.to_dict())
    for side in dbf.sidecars:
        res.warnings.append({"kind": "sidecar_not_merged", "evidence_file": side,
                             "message": f"{side}: {SIDECAR_WARNING}"})
    role = dbf.role.role
    try:
        counts: Dict[str, int] = {}
        for label in db.page_map().values():
            counts[label] = counts.get(label, 0) + 1
        res.page_map = dict(sorted(counts.items()))
        if config.include_carved:
            res.carved_count = len(kodi_db.carved_records(db))
        inc = config.include_carved
        if role is Role.ADDONS:
            res.addons, res.repos = kodi_db.extract_addons(db, inc, column_map)
        elif role is Role.MYVIDEOS:
            res.playback = kodi_db.extract_playback(db, inc, column_map)
        elif role is Role.TEXTURES:
            res.textures = kodi_db.extract_textures(db, inc, column_map)
        elif role is Role.VIEWMODES:
            res.usage = kodi_db.extract_usage(db, inc, column_map)
        if config.raw_tables and role not in (Role.ADDONS, Role.MYVIDEOS, Role.TEXTURES,
                                              Role.VIEWMODES):
            res.raw_rows = kodi_db.dump_tables(db, inc)
    except NoRecognizedTables as exc:
        res.warnings.append({"kind": "no_recognized_tables", "evidence_file": rel, "message": str(exc)})
    except SqliteFormatError as exc:
        res.anomalies.append({"db_path": rel, "page": None, "kind": "parse_aborted", "detail": str(exc)})
    res.anomalies.extend(a.to_dict(rel) for a in db.anomalies)
    return res


def _process_logs(source: EvidenceSource, inst: KodiInstallation,
                  profiles: Dict[str, LogProfile]) -> Tuple[List[LogResult], dict]:
    results = []
    for lf in inst.logs:
        try:
            data = source.read_file(lf.relative_path)
        except FileTooLarge:
            log.warning("%s: log larger than the read cap, skipped", lf.relative_path)
            continue
        events, summary = parse_log(data, lf.session_index, profiles=profiles)
        summary.evidence_file = lf.relative_path
        results.append(LogResult(lf, source.manifest_entry(lf.relative_path).sha256, events, summary))
    current = next((r.summary for r in results if r.file.session_index == 0), None)
    previous = next((r.summary for r in results if r.file.session_index == 1), None)
    pairing = pair_sessions(current, previous) if results else None
    return results, pairing


def process_installation(source: EvidenceSource, inst: KodiInstallation, config: RunConfig,
                         profiles: Dict[str, LogProfile], column_map: Optional[dict]
                         ) -> InstallationArtifacts:
    art = InstallationArtifacts(inst)
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        art.databases = list(pool.map(
            lambda d: process_database(source, d, config, column_map), inst.databases))
    for d in art.databases:
        art.warnings.extend(d.warnings)
        art.anomalies.extend(d.anomalies)

    art.logs, pairing = _process_logs(source, inst, profiles)
    if pairing is None:
        art.warnings.append({"kind": "no_logs", "evidence_file": inst.home_path,
                             "message": f"{inst.home_path}: no Kodi log files found"})
    else:
        art.sessions = [s.to_dict() for s in pairing.sessions]
        art.warnings.extend(pairing.warnings)
        art.anomalies.extend(pairing.anomalies)

    if inst.addons_dir:
        art.inventory = inventory_addons(source, inst.addons_dir)
        art.anomalies.extend(art.inventory.anomalies)
        for m in art.inventory.manifests:
            art.anomalies.extend(dict(a, addon_dir=m.dir_path) for a in m.anomalies)
    if inst.packages_dir:
        art.packages = inspect_packages(source, inst.packages_dir)

    addon_dbs = [d for d in art.databases if d.file.role.role is Role.ADDONS and d.header]
    if addon_dbs and art.inventory is not None:
        current = max(addon_dbs, key=lambda d: (d.file.role.suffix or 0, d.file.relative_path))
        art.discrepancies = [x.to_dict() for x in cross_reference(
            art.inventory.manifests, current.addons, art.packages)]

    events: List[TimelineEvent] = []
    for d in art.databases:
        events += addon_events(d.addons, d.evidence)
        events += repo_events(d.repos, d.evidence)
        events += playback_events(d.playback, d.evidence)
        events += texture_events(d.textures, d.evidence)
    for lg in art.logs:
        events += log_events(lg.events, (lg.file.relative_path, lg.sha256))
    events += package_events(art.packages)
    if art.inventory is not None:
        for m in art.inventory.manifests:
            if not m.manifest_file:
                continue
            st = source.stat(m.manifest_file)
            events.append(TimelineEvent(
                from_epoch_utc(st.st_mtime), Source.ADDON_MANIFEST, "addon_manifest_modified",
                m.addon_id, {"version": m.version, "kind": m.kind.value, "update_url": m.update_url},
                m.manifest_file, m.manifest_sha256 or "", Liveness.LIVE.value))
    art.events = events
    return art


@dataclass
class RunResult:
    installations: List[KodiInstallation]
    artifacts: List[InstallationArtifacts]
    timeline: List[TimelineEvent]
    report: EvidenceReport


def run(source: EvidenceSource, config: RunConfig, extract: bool = True) -> RunResult:
    installs = scan(source, config.profiles_dir)
    profiles = load_profiles(config.profiles_dir)
    from . import resources
    cmap = resources.column_map(config.profiles_dir)
    artifacts = [process_installation(source, i, config, profiles, cmap) for i in installs] \
        if extract else []
    timeline = build_timeline(*(a.events for a in artifacts))
    report = EvidenceReport(
        case={
            "case_id": source.case_id,
            "examiner": source.examiner,
            "opened_at": rfc3339_utc(source.opened_at),
            "tool": "streamtrace",
            "tool_version": __version__,
            "include_carved": config.include_carved,
        },
        installations=[a.summary() for a in artifacts] or [i.to_dict() for i in installs],
        timeline=timeline,
        discrepancies=[dict(x, home_path=a.installation.home_path)
                       for a in artifacts for x in a.discrepancies],
        warnings=[w for a in artifacts for w in a.warnings],
        anomalies=[x for a in artifacts for x in a.anomalies],
    )
    report.manifest = [e.to_dict() for e in source.export_manifest()]
    return RunResult(installs, artifacts, timeline, report)
