"""Discovery of Kodi home folders inside an evidence tree.

Known per-platform layouts are probed first; any remaining directory named
``Database`` that holds a recognisable Kodi database is reported as a
``Generic`` installation (portable or relocated installs).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from . import resources
from .errors import NoSuffixes, PathEscapesRoot, SymlinkRefused
from .evidence import EvidenceSource


class Role(str, Enum):
    ADDONS = "Addons"
    ADSP = "ADSP"
    EPG = "EPG"
    MYMUSIC = "MyMusic"
    MYVIDEOS = "MyVideos"
    TEXTURES = "Textures"
    TV = "TV"
    VIEWMODES = "ViewModes"
    UNKNOWN = "Unknown"


class Confidence(str, Enum):
    EXACT = "Exact"
    AMBIGUOUS = "Ambiguous"


PLATFORM_ORDER = ("OSMC", "Windows", "LinuxDesktop", "Android")
LOG_NAMES = {"kodi.log": 0, "kodi.txt": 0, "kodi.old.log": 1}
SIDECAR_SUFFIXES = ("-wal", "-shm", "-journal")
# roles whose suffix tracks the Kodi release, in order of preference
_VERSION_ROLES = (Role.ADDONS, Role.MYVIDEOS, Role.MYMUSIC, Role.TV, Role.EPG,
                  Role.VIEWMODES, Role.ADSP)

_STEMS = {r.value.lower(): r for r in Role if r is not Role.UNKNOWN}
_NAME_RE = re.compile(r"^(?P<stem>.*?)(?P<digits>\d+)?$")


@dataclass(frozen=True)
class DatabaseRole:
    role: Role
    filename: str
    suffix: Optional[int]

    def to_dict(self) -> dict:
        return {"role": self.role.value, "filename": self.filename, "suffix": self.suffix}


@dataclass
class DatabaseFile:
    relative_path: str
    role: DatabaseRole
    sidecars: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = self.role.to_dict()
        d["path"] = self.relative_path
        d["sidecars"] = list(self.sidecars)
        return d


@dataclass
class LogFile:
    relative_path: str
    session_index: int  # 0 = current, 1 = previous

    def to_dict(self) -> dict:
        return {"path": self.relative_path, "session_index": self.session_index}


@dataclass
class VersionHint:
    database_suffix: int
    release_name: Optional[str]
    confidence: Optional[Confidence]

    def to_dict(self) -> dict:
        return {"database_suffix": self.database_suffix, "release_name": self.release_name,
                "confidence": self.confidence.value if self.confidence else None}


@dataclass
class KodiInstallation:
    home_path: str
    platform: str
    version_hint: Optional[VersionHint] = None
    databases: List[DatabaseFile] = field(default_factory=list)
    logs: List[LogFile] = field(default_factory=list)
    addons_dir: Optional[str] = None
    userdata_dir: Optional[str] = None
    packages_dir: Optional[str] = None

    def database(self, role: Role) -> List[DatabaseFile]:
        return [d for d in self.databases if d.role.role is role]

    def suffixes(self) -> Dict[Role, int]:
        """Highest suffix seen per role (upgrades leave older databases behind)."""
        out: Dict[Role, int] = {}
        for d in self.databases:
            r = d.role
            if r.suffix is None or r.role in (Role.UNKNOWN, Role.TEXTURES):
                continue
            out[r.role] = max(out.get(r.role, r.suffix), r.suffix)
        return out

    def summary_line(self) -> str:
        hint = self.version_hint
        suffix = hint.database_suffix if hint else "-"
        release = (hint.release_name or "-") if hint else "-"
        return (f"{self.platform}\t{self.home_path}\tsuffix={suffix}\trelease={release}\t"
                f"databases={len(self.databases)}\tlogs={len(self.logs)}")

    def to_dict(self) -> dict:
        return {
            "home_path": self.home_path,
            "platform": self.platform,
            "version_hint": self.version_hint.to_dict() if self.version_hint else None,
            "databases": [d.to_dict() for d in self.databases],
            "logs": [lg.to_dict() for lg in self.logs],
            "addons_dir": self.addons_dir,
            "userdata_dir": self.userdata_dir,
            "packages_dir": self.packages_dir,
        }


def classify_database(filename: str) -> DatabaseRole:
    """Role and numeric suffix of a bare database filename such as ``Addons27.db``."""
    stem = filename
    if stem.lower().endswith(".db"):
        stem = stem[:-3]
    m = _NAME_RE.match(stem)
    digits = m.group("digits")
    role = _STEMS.get(m.group("stem").lower(), Role.UNKNOWN)
    return DatabaseRole(role, filename, int(digits) if digits else None)


def infer_version(suffixes: Mapping, table: Optional[dict] = None
                  ) -> Optional[Tuple[str, Confidence]]:
    """Release name implied by database suffixes.

    Each role's suffix maps to one or more candidate releases (some suffixes
    span several releases). Candidates are intersected across roles; an
    empty intersection means the roles disagree and the result is Ambiguous.
    Returns None when no suffix is in the table.
    """
    if not suffixes:
        raise NoSuffixes("no database suffixes to infer a version from")
    table = table if table is not None else resources.suffix_releases()
    by_role = {Role(k) if not isinstance(k, Role) else k: v for k, v in suffixes.items()}
    lists = []
    for role in _VERSION_ROLES:
        if role in by_role:
            cands = table.get(role.value, {}).get(str(by_role[role]))
            if cands:
                lists.append(cands)
    if not lists:
        return None
    common = [c for c in lists[0] if all(c in other for other in lists[1:])]
    if common:
        return common[0], Confidence.EXACT
    return lists[0][0], Confidence.AMBIGUOUS


# -- tree probing ------------------------------------------------------------

def _child(source: EvidenceSource, rel: str, name: str, kind: str = "dir") -> Optional[str]:
    """Case-insensitive lookup of *name* under *rel*."""
    want = name.lower()
    for e in source.listdir(rel):
        if e.name.lower() == want and e.kind == kind:
            return e.relative_path
    return None


def _expand(source: EvidenceSource, pattern: str) -> List[str]:
    current = [""]
    for seg in pattern.split("/"):
        nxt = []
        for rel in current:
            try:
                entries = source.listdir(rel)
            except (FileNotFoundError, SymlinkRefused, PathEscapesRoot):
                continue
            for e in entries:
                if e.kind == "dir" and (seg == "*" or e.name.lower() == seg.lower()):
                    nxt.append(e.relative_path)
        current = nxt
        if not current:
            break
    return current


def _database_dirs(source: EvidenceSource, userdata: str) -> List[str]:
    out = []
    db_dir = _child(source, userdata, "Database")
    if db_dir:
        out.append(db_dir)
    profiles = _child(source, userdata, "profiles")
    if profiles:
        for e in source.listdir(profiles):
            if e.kind == "dir":
                sub = _child(source, e.relative_path, "Database")
                if sub:
                    out.append(sub)
    return out


def _collect_databases(source: EvidenceSource, db_dir: str) -> List[DatabaseFile]:
    entries = source.listdir(db_dir)
    names = {e.name: e for e in entries}
    out = []
    for e in entries:
        if e.kind != "file" or not e.name.lower().endswith(".db"):
            continue
        sidecars = [names[e.name + s].relative_path for s in SIDECAR_SUFFIXES
                    if e.name + s in names and names[e.name + s].kind == "file"]
        out.append(DatabaseFile(e.relative_path, classify_database(e.name), sidecars))
    return out


def _collect_logs(source: EvidenceSource, home: str) -> List[LogFile]:
    out = []
    dirs = [home]
    temp = _child(source, home, "temp")
    if temp:
        dirs.append(temp)
    for d in dirs:
        for e in source.listdir(d):
            idx = LOG_NAMES.get(e.name.lower())
            if idx is not None and e.kind == "file":
                out.append(LogFile(e.relative_path, idx))
    out.sort(key=lambda lg: (lg.session_index, lg.relative_path))
    return out


def _build(source: EvidenceSource, home: str, platform: str,
           table: Optional[dict]) -> Optional[KodiInstallation]:
    inst = KodiInstallation(home, platform)
    inst.userdata_dir = _child(source, home, "userdata")
    inst.addons_dir = _child(source, home, "addons")
    if inst.addons_dir:
        inst.packages_dir = _child(source, inst.addons_dir, "packages")
    db_dirs = _database_dirs(source, inst.userdata_dir) if inst.userdata_dir else []
    if not db_dirs and platform == "Generic":
        db_dirs = [home]
    for d in db_dirs:
        inst.databases.extend(_collect_databases(source, d))
    inst.databases.sort(key=lambda d: d.relative_path)
    known = any(d.role.role is not Role.UNKNOWN for d in inst.databases)
    if not (inst.userdata_dir or inst.addons_dir or known):
        return None
    inst.logs = _collect_logs(source, home)
    inst.version_hint = _version_hint(inst, table)
    return inst


def _version_hint(inst: KodiInstallation, table: Optional[dict]) -> Optional[VersionHint]:
    suffixes = inst.suffixes()
    if not suffixes:
        return None
    suffix = next(suffixes[r] for r in _VERSION_ROLES if r in suffixes)
    guess = infer_version(suffixes, table)
    if guess is None:
        return VersionHint(suffix, None, None)
    return VersionHint(suffix, guess[0], guess[1])


def _inside(path: str, homes) -> bool:
    return any(path == h or path.startswith(h + "/") for h in homes)


def scan(source: EvidenceSource, data_dir: Optional[Path] = None) -> List[KodiInstallation]:
    """Every Kodi installation in the tree, ordered by home path."""
    patterns = resources.platforms(data_dir)
    table = resources.suffix_releases(data_dir)
    found: Dict[str, KodiInstallation] = {}
    order = [p for p in PLATFORM_ORDER if p in patterns] + \
            sorted(p for p in patterns if p not in PLATFORM_ORDER)
    for platform in order:
        for pattern in patterns[platform]:
            for home in _expand(source, pattern):
                if home in found:
                    continue
                inst = _build(source, home, platform, table)
                if inst is not None:
                    found[home] = inst
    for rel, entries in source.walk_dirs(""):
        if _inside(rel, found):
            continue
        for e in entries:
            if e.kind != "dir" or e.name.lower() != "database":
                continue
            files = [x for x in source.listdir(e.relative_path) if x.kind == "file"]
            if not any(x.name.lower().endswith(".db")
                       and classify_database(x.name).role is not Role.UNKNOWN for x in files):
                continue
            parent = rel.rsplit("/", 1)
            if rel and parent[-1].lower() == "userdata":
                home = parent[0] if len(parent) == 2 else ""
            else:
                home = e.relative_path
            if home in found or _inside(e.relative_path, found):
                continue
            inst = _build(source, home, "Generic", table)
            if inst is not None:
                found[home] = inst
    return [found[h] for h in sorted(found)]
