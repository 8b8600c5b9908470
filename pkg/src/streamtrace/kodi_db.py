"""Kodi artifacts pulled out of parsed databases.

Column names are resolved through the editable column map, so renamed or
missing columns degrade to unknown fields instead of failing. Carved rows go
through the same mapping and keep their liveness flag.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple
from urllib.parse import unquote

from . import resources
from .errors import NoRecognizedTables
from .sqlite.format import CellValue, Liveness, SqliteDatabase, SqliteRecord, ValueKind
from .sqlite.schema import TableInfo
from .timestamps import Timestamp, parse_local

_UUID_RE = re.compile(r"^[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}$")
_SCHEME_RE = re.compile(r"^(?P<scheme>[A-Za-z][A-Za-z0-9+.-]*)://")
_DRIVE_RE = re.compile(r"^(?P<drive>[A-Za-z]):[\\/]")
_REMOVABLE_PREFIXES = ("/media/", "/mnt/", "/run/media/", "/volumes/")
_INTERNAL_STORAGE = ("/storage/emulated/", "/storage/self/")


class SourceKind(str, Enum):
    LOCAL_FIXED = "LocalFixed"
    REMOVABLE_OR_EXTERNAL = "RemovableOrExternal"
    NETWORK_URL = "NetworkURL"
    UNKNOWN = "Unknown"


def _ts(ts: Optional[Timestamp]):
    return ts.to_dict() if ts is not None else None


def _cells(extras: Dict[str, CellValue]) -> dict:
    return {k: v.to_dict() for k, v in extras.items()}


@dataclass
class Provenance:
    table: str
    rowid: Optional[int]
    page: int
    offset: int

    def to_dict(self) -> dict:
        return {"table": self.table, "rowid": self.rowid, "page": self.page, "offset": self.offset}


@dataclass
class AddonRecord:
    addon_id: str
    enabled: Optional[bool]
    install_date: Optional[Timestamp]
    last_updated: Optional[Timestamp]
    last_used: Optional[Timestamp]
    origin: Optional[str]
    liveness: Liveness
    version: Optional[str] = None
    # heuristic: a UUID-shaped origin is the installer's serial, not a repository id
    origin_is_installer_serial: Optional[bool] = None
    extras: Dict[str, CellValue] = field(default_factory=dict)
    provenance: Optional[Provenance] = None

    def to_dict(self) -> dict:
        return {
            "addon_id": self.addon_id,
            "version": self.version,
            "enabled": self.enabled,
            "install_date": _ts(self.install_date),
            "last_updated": _ts(self.last_updated),
            "last_used": _ts(self.last_used),
            "origin": self.origin,
            "origin_is_installer_serial": self.origin_is_installer_serial,
            "origin_rule": "heuristic: UUID-shaped origin" if self.origin else None,
            "liveness": self.liveness.value,
            "extras": _cells(self.extras),
            "provenance": self.provenance.to_dict() if self.provenance else None,
        }


@dataclass
class RepoRecord:
    repo_id: str
    checksum: Optional[str]
    last_checked: Optional[Timestamp]
    version: Optional[str]
    liveness: Liveness
    extras: Dict[str, CellValue] = field(default_factory=dict)
    provenance: Optional[Provenance] = None

    def to_dict(self) -> dict:
        return {
            "repo_id": self.repo_id,
            "checksum": self.checksum,
            "last_checked": _ts(self.last_checked),
            "version": self.version,
            "liveness": self.liveness.value,
            "extras": _cells(self.extras),
            "provenance": self.provenance.to_dict() if self.provenance else None,
        }


@dataclass
class PlaybackRecord:
    file_name: str
    path: str
    play_count: Optional[int]
    last_played: Optional[Timestamp]
    source_kind: SourceKind
    liveness: Liveness
    date_added: Optional[Timestamp] = None
    extras: Dict[str, CellValue] = field(default_factory=dict)
    provenance: Optional[Provenance] = None

    def to_dict(self) -> dict:
        return {
            "file_name": self.file_name,
            "path": self.path,
            "play_count": self.play_count,
            "last_played": _ts(self.last_played),
            "date_added": _ts(self.date_added),
            "source_kind": self.source_kind.value,
            "liveness": self.liveness.value,
            "extras": _cells(self.extras),
            "provenance": self.provenance.to_dict() if self.provenance else None,
        }


@dataclass
class TextureRecord:
    url: str
    cached_path: Optional[str]
    liveness: Liveness
    last_used: Optional[Timestamp] = None
    use_count: Optional[int] = None
    provenance: Optional[Provenance] = None

    def to_dict(self) -> dict:
        return {
            "url": self.url,
            "cached_path": self.cached_path,
            "last_used": _ts(self.last_used),
            "use_count": self.use_count,
            "liveness": self.liveness.value,
            "provenance": self.provenance.to_dict() if self.provenance else None,
        }


@dataclass
class UsageRecord:
    table: str
    raw_columns: List[Tuple[str, CellValue]]
    liveness: Liveness
    provenance: Optional[Provenance] = None

    def to_dict(self) -> dict:
        return {
            "table": self.table,
            "raw_columns": [[name, v.to_dict()] for name, v in self.raw_columns],
            "liveness": self.liveness.value,
            "provenance": self.provenance.to_dict() if self.provenance else None,
        }


# -- helpers -----------------------------------------------------------------

def classify_source(path: str) -> SourceKind:
    """Where a played file lived, judged only from the shape of its path."""
    if not path:
        return SourceKind.UNKNOWN
    m = _SCHEME_RE.match(path)
    if m:
        scheme = m.group("scheme").lower()
        if scheme == "special":
            return SourceKind.LOCAL_FIXED
        if scheme == "stack":
            return classify_source(path[len("stack://"):].split(" , ")[0])
        if scheme in ("zip", "rar", "archive"):
            inner = unquote(path[m.end():].split("/", 1)[0])
            return classify_source(inner) if inner else SourceKind.UNKNOWN
        if scheme == "file":
            return classify_source(path[len("file://"):])
        return SourceKind.NETWORK_URL
    if path.startswith("\\\\") or path.startswith("//"):
        return SourceKind.NETWORK_URL
    m = _DRIVE_RE.match(path)
    if m:
        return SourceKind.LOCAL_FIXED if m.group("drive").upper() == "C" else SourceKind.REMOVABLE_OR_EXTERNAL
    if path.startswith("/"):
        low = path.lower()
        if low.startswith(_REMOVABLE_PREFIXES):
            return SourceKind.REMOVABLE_OR_EXTERNAL
        if low.startswith("/storage/") and not low.startswith(_INTERNAL_STORAGE):
            return SourceKind.REMOVABLE_OR_EXTERNAL
        return SourceKind.LOCAL_FIXED
    return SourceKind.UNKNOWN


def _text(v: Optional[CellValue]) -> Optional[str]:
    if v is None or v.value is None or v.kind is ValueKind.NULL:
        return None
    if v.kind is ValueKind.BLOB:
        return bytes(v.value).hex()
    return str(v.value)


def _int(v: Optional[CellValue]) -> Optional[int]:
    if v is None or v.value is None:
        return None
    if v.kind is ValueKind.INTEGER:
        return v.value
    if v.kind is ValueKind.FLOAT:
        return int(v.value)
    if v.kind is ValueKind.TEXT:
        try:
            return int(v.value.strip())
        except ValueError:
            return None
    return None


def _bool(v: Optional[CellValue]) -> Optional[bool]:
    if v is None or v.value is None:
        return None
    if v.kind in (ValueKind.INTEGER, ValueKind.FLOAT):
        return bool(v.value)
    if v.kind is ValueKind.TEXT:
        low = v.value.strip().lower()
        if low in ("1", "true", "yes"):
            return True
        if low in ("0", "false", "no"):
            return False
    return None


def _time(v: Optional[CellValue]) -> Optional[Timestamp]:
    text = _text(v)
    if not text:
        return None
    return parse_local(text)


class _Mapped:
    """One table resolved against a column-map entry."""

    def __init__(self, info: TableInfo, fields: Dict[str, List[str]]):
        self.info = info
        names = {c.name.lower(): c.name for c in info.stored_columns}
        self.columns: Dict[str, Optional[str]] = {}
        for f, cands in fields.items():
            self.columns[f] = next((names[c.lower()] for c in cands if c.lower() in names), None)
        used = {c for c in self.columns.values() if c}
        self.extra_columns = [c.name for c in info.stored_columns if c.name not in used]

    def get(self, row: Dict[str, CellValue], f: str) -> Optional[CellValue]:
        col = self.columns.get(f)
        return row.get(col) if col else None

    def extras(self, row: Dict[str, CellValue]) -> Dict[str, CellValue]:
        out = {c: row[c] for c in self.extra_columns if c in row}
        out.update({k: v for k, v in row.items() if k.startswith("_extra")})
        return out


def _resolve(db: SqliteDatabase, entry: dict) -> Optional[_Mapped]:
    info = db.find_table(*entry.get("tables", []))
    if info is None:
        return None
    return _Mapped(info, entry.get("fields", {}))


def carved_records(db: SqliteDatabase) -> List[SqliteRecord]:
    """Carve once per database object; extractors share the result."""
    cached = getattr(db, "_streamtrace_carved", None)
    if cached is None:
        cached = list(db.carve_deleted())
        db._streamtrace_carved = cached
    return cached


def _rows(db: SqliteDatabase, mapped: _Mapped, include_carved: bool):
    rows = db.table_rows(mapped.info)
    if include_carved:
        recs = [r for r in carved_records(db) if r.table == mapped.info.name]
        rows.extend(db.named_rows(mapped.info, recs))
    return rows


def _prov(info: TableInfo, rec: SqliteRecord) -> Provenance:
    return Provenance(info.name, rec.rowid, rec.page_number, rec.byte_offset)


def _role_map(role: str, column_map: Optional[dict]) -> dict:
    cmap = column_map if column_map is not None else resources.column_map()
    return cmap.get(role, {})


# -- extractors --------------------------------------------------------------

def extract_addons(db: SqliteDatabase, include_carved: bool = True,
                   column_map: Optional[dict] = None) -> Tuple[List[AddonRecord], List[RepoRecord]]:
    """Installed add-ons and registered repositories from an Addons database."""
    rmap = _role_map("Addons", column_map)
    installed = _resolve(db, rmap.get("installed", {}))
    meta = _resolve(db, rmap.get("addon_meta", {}))
    repo = _resolve(db, rmap.get("repo", {}))
    if installed is None and meta is None and repo is None:
        raise NoRecognizedTables(f"{db.path or 'database'}: no add-on or repository table")

    versions: Dict[str, str] = {}
    if meta is not None:
        for rec, row in db.table_rows(meta.info):
            aid, ver = _text(meta.get(row, "addon_id")), _text(meta.get(row, "version"))
            if aid and ver and aid not in versions:
                versions[aid] = ver

    addons: List[AddonRecord] = []
    source = installed or meta
    if source is not None:
        for rec, row in _rows(db, source, include_carved):
            aid = _text(source.get(row, "addon_id"))
            if not aid:
                continue
            origin = _text(source.get(row, "origin"))
            addons.append(AddonRecord(
                addon_id=aid,
                enabled=_bool(source.get(row, "enabled")),
                install_date=_time(source.get(row, "install_date")),
                last_updated=_time(source.get(row, "last_updated")),
                last_used=_time(source.get(row, "last_used")),
                origin=origin,
                liveness=rec.liveness,
                version=versions.get(aid) if source is installed else _text(source.get(row, "version")),
                origin_is_installer_serial=bool(_UUID_RE.match(origin)) if origin else None,
                extras=source.extras(row),
                provenance=_prov(source.info, rec),
            ))

    repos: List[RepoRecord] = []
    if repo is not None:
        for rec, row in _rows(db, repo, include_carved):
            rid = _text(repo.get(row, "repo_id"))
            if not rid:
                continue
            repos.append(RepoRecord(
                repo_id=rid,
                checksum=_text(repo.get(row, "checksum")),
                last_checked=_time(repo.get(row, "last_checked")),
                version=_text(repo.get(row, "version")),
                liveness=rec.liveness,
                extras=repo.extras(row),
                provenance=_prov(repo.info, rec),
            ))
    return addons, repos


def extract_playback(db: SqliteDatabase, include_carved: bool = True,
                     column_map: Optional[dict] = None) -> List[PlaybackRecord]:
    """Every file row of a MyVideos database joined to its directory path."""
    rmap = _role_map("MyVideos", column_map)
    files = _resolve(db, rmap.get("files", {}))
    paths = _resolve(db, rmap.get("path", {}))
    if files is None:
        raise NoRecognizedTables(f"{db.path or 'database'}: no files table")
    by_id: Dict[int, str] = {}
    if paths is not None:
        # live rows first so a carved row never shadows the current path
        for rec, row in _rows(db, paths, include_carved):
            pid = _int(paths.get(row, "path_id"))
            p = _text(paths.get(row, "path"))
            if pid is not None and p is not None and pid not in by_id:
                by_id[pid] = p
    out: List[PlaybackRecord] = []
    for rec, row in _rows(db, files, include_carved):
        name = _text(files.get(row, "file_name")) or ""
        pid = _int(files.get(row, "path_id"))
        directory = by_id.get(pid, "") if pid is not None else ""
        full = _join(directory, name)
        if not full:
            continue
        out.append(PlaybackRecord(
            file_name=name,
            path=directory,
            play_count=_int(files.get(row, "play_count")),
            last_played=_time(files.get(row, "last_played")),
            source_kind=classify_source(full),
            liveness=rec.liveness,
            date_added=_time(files.get(row, "date_added")),
            extras=files.extras(row),
            provenance=_prov(files.info, rec),
        ))
    return out


def _join(directory: str, name: str) -> str:
    if not directory:
        return name
    if _SCHEME_RE.match(name or ""):
        return name
    return directory + name


def extract_textures(db: SqliteDatabase, include_carved: bool = True,
                     column_map: Optional[dict] = None) -> List[TextureRecord]:
    rmap = _role_map("Textures", column_map)
    tex = _resolve(db, rmap.get("texture", {}))
    if tex is None:
        raise NoRecognizedTables(f"{db.path or 'database'}: no texture table")
    sizes = _resolve(db, rmap.get("sizes", {}))
    usage: Dict[int, Tuple[Optional[Timestamp], Optional[int]]] = {}
    if sizes is not None:
        for rec, row in db.table_rows(sizes.info):
            tid = _int(sizes.get(row, "texture_id"))
            if tid is not None and tid not in usage:
                usage[tid] = (_time(sizes.get(row, "last_used")), _int(sizes.get(row, "use_count")))
    out: List[TextureRecord] = []
    for rec, row in _rows(db, tex, include_carved):
        url = _text(tex.get(row, "url"))
        if not url:
            continue
        tid = _int(tex.get(row, "texture_id"))
        last_used, count = usage.get(tid, (None, None)) if tid is not None else (None, None)
        out.append(TextureRecord(url, _text(tex.get(row, "cached_path")), rec.liveness,
                                 last_used, count, _prov(tex.info, rec)))
    return out


def extract_usage(db: SqliteDatabase, include_carved: bool = True,
                  column_map: Optional[dict] = None) -> List[UsageRecord]:
    """ViewModes rows passed through verbatim."""
    rmap = _role_map("ViewModes", column_map)
    mapped = [m for m in (_resolve(db, e) for e in rmap.values()) if m is not None]
    if not mapped:
        raise NoRecognizedTables(f"{db.path or 'database'}: no view table")
    out = []
    for m in mapped:
        for rec, row in _rows(db, m, include_carved):
            out.append(UsageRecord(m.info.name, list(row.items()), rec.liveness, _prov(m.info, rec)))
    return out


def dump_tables(db: SqliteDatabase, include_carved: bool = True) -> List[UsageRecord]:
    """Raw rows of every table, for databases without a field mapping."""
    out = []
    for name, info in sorted(db.tables().items()):
        if info.without_rowid:
            continue
        m = _Mapped(info, {})
        for rec, row in _rows(db, m, include_carved):
            out.append(UsageRecord(name, list(row.items()), rec.liveness, _prov(info, rec)))
    return out
