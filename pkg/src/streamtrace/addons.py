"""Add-on folders, downloaded package zips, and their agreement with the
Addons database.
"""
from __future__ import annotations

import io
import re
import struct
import xml.etree.ElementTree as ET
import zipfile
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

from .errors import DirNotFound, FileTooLarge, SymlinkRefused
from .evidence import EvidenceSource
from .kodi_db import AddonRecord
from .sqlite.format import Liveness
from .timestamps import ClockTrust, Timestamp, from_epoch_utc

MANIFEST_NAMES = ("addon.xml", "add-on.xml")
CODE_ENTRY_NAMES = ("addon.py", "add-on.py", "default.py", "main.py", "service.py")
LICENSE_RE = re.compile(r"^(license|licence|copying)(\.(txt|md))?$", re.I)
URL_RE = re.compile(r"""(?:https?|ftp|rtmpe?|rtsp|mms)://[^\s'"<>()\[\]{}\\]+""")
PACKAGE_RE = re.compile(r"^(?P<id>[A-Za-z0-9_.\-]+?)-(?P<version>\d[0-9A-Za-z.+~_\-]*)\.zip$", re.I)
SKIP_DIRS = {"packages", "temp"}

_LOCAL_HEADER = struct.Struct("<4sHHHHHIIIHH")


class AddonKind(str, Enum):
    REPOSITORY = "Repository"
    VIDEO_PLUGIN = "VideoPlugin"
    SCRAPER = "Scraper"
    LANGUAGE_RESOURCE = "LanguageResource"
    SCRIPT = "Script"
    OTHER = "Other"


@dataclass
class CodeFile:
    relative_path: str
    sha256: str
    line_count: int

    def to_dict(self) -> dict:
        return {"path": self.relative_path, "sha256": self.sha256, "lines": self.line_count}


@dataclass
class AddonManifest:
    addon_id: str
    version: str
    kind: AddonKind
    dir_path: str
    provider: Optional[str] = None
    name: Optional[str] = None
    dependencies: List[Tuple[str, Optional[str]]] = field(default_factory=list)
    update_url: Optional[str] = None
    has_code: bool = False
    has_license: bool = False
    manifest_file: Optional[str] = None
    manifest_sha256: Optional[str] = None
    extension_points: List[str] = field(default_factory=list)
    repository_urls: Dict[str, str] = field(default_factory=dict)
    metadata: Dict[str, str] = field(default_factory=dict)
    code_files: List[CodeFile] = field(default_factory=list)
    code_urls: List[str] = field(default_factory=list)
    anomalies: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "addon_id": self.addon_id,
            "version": self.version,
            "kind": self.kind.value,
            "name": self.name,
            "provider": self.provider,
            "dir_path": self.dir_path,
            "manifest_file": self.manifest_file,
            "manifest_sha256": self.manifest_sha256,
            "dependencies": [[a, v] for a, v in self.dependencies],
            "update_url": self.update_url,
            "repository_urls": dict(sorted(self.repository_urls.items())),
            "extension_points": list(self.extension_points),
            "metadata": dict(sorted(self.metadata.items())),
            "has_code": self.has_code,
            "has_license": self.has_license,
            "code_files": [c.to_dict() for c in self.code_files],
            "code_urls": list(self.code_urls),
            "anomalies": list(self.anomalies),
        }


@dataclass
class AddonInventory:
    manifests: List[AddonManifest]
    anomalies: List[dict]  # subdirectories that produced no manifest


@dataclass
class PackageArtifact:
    zip_name: str
    relative_path: str
    implied_addon_id: str
    implied_version: Optional[str]
    nonstandard_name: bool
    file_mtime: Timestamp
    sha256: str
    zip_internal_times: Optional[Tuple[Timestamp, Timestamp]] = None
    entry_count: int = 0
    zip_source: Optional[str] = None  # "central_directory" or "local_headers"
    anomalies: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        times = None
        if self.zip_internal_times:
            times = {"earliest": self.zip_internal_times[0].to_dict(),
                     "latest": self.zip_internal_times[1].to_dict()}
        return {
            "zip_name": self.zip_name,
            "path": self.relative_path,
            "implied_addon_id": self.implied_addon_id,
            "implied_version": self.implied_version,
            "nonstandard_name": self.nonstandard_name,
            "file_mtime": self.file_mtime.to_dict(),
            "zip_internal_times": times,
            "entry_count": self.entry_count,
            "zip_source": self.zip_source,
            "sha256": self.sha256,
            "anomalies": list(self.anomalies),
        }


class DiscrepancyKind(str, Enum):
    DISK_ONLY = "DiskOnly"
    DB_ONLY_LIVE = "DbOnlyLive"
    DB_ONLY_CARVED = "DbOnlyCarved"
    VERSION_MISMATCH = "VersionMismatch"


@dataclass
class Discrepancy:
    kind: DiscrepancyKind
    addon_id: str
    detail: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "addon_id": self.addon_id, "detail": self.detail}


# -- manifest parsing ---------------------------------------------------------

def _kind(addon_id: str, points: List[Tuple[str, dict]]) -> AddonKind:
    names = [p for p, _ in points]
    if "xbmc.addon.repository" in names:
        return AddonKind.REPOSITORY
    if any(p.startswith("xbmc.metadata.scraper") for p in names):
        return AddonKind.SCRAPER
    if "kodi.resource.language" in names:
        return AddonKind.LANGUAGE_RESOURCE
    for p, attrs in points:
        if p == "xbmc.python.pluginsource":
            provides = (attrs.get("provides") or "").split()
            if "video" in provides or addon_id.startswith("plugin.video."):
                return AddonKind.VIDEO_PLUGIN
    if any(p in ("xbmc.python.script", "xbmc.python.module", "xbmc.python.library",
                 "xbmc.service") for p in names):
        return AddonKind.SCRIPT
    prefixes = (("repository.", AddonKind.REPOSITORY), ("plugin.video.", AddonKind.VIDEO_PLUGIN),
                ("metadata.", AddonKind.SCRAPER), ("resource.language.", AddonKind.LANGUAGE_RESOURCE),
                ("script.", AddonKind.SCRIPT))
    for prefix, kind in prefixes:
        if addon_id.startswith(prefix):
            return kind
    return AddonKind.OTHER


@dataclass
class _Parsed:
    attrs: Dict[str, str]
    imports: List[Tuple[str, Optional[str]]]
    points: List[Tuple[str, dict]]
    repo_urls: Dict[str, str]
    metadata: Dict[str, str]
    recovered: bool = False


def _parse_tree(text: str) -> _Parsed:
    root = ET.fromstring(text)
    if root.tag != "addon":
        raise ET.ParseError(f"root element is <{root.tag}>, expected <addon>")
    imports = [(imp.get("addon", ""), imp.get("version")) for imp in root.iter("import")]
    points, repo_urls, metadata = [], {}, {}
    for ext in root.findall("extension"):
        point = ext.get("point", "")
        points.append((point, dict(ext.attrib)))
        if point == "xbmc.addon.repository":
            for tag in ("info", "checksum", "datadir"):
                el = ext.find(f".//{tag}")
                if el is not None and el.text and tag not in repo_urls:
                    repo_urls[tag] = el.text.strip()
        if point == "xbmc.addon.metadata":
            for child in ext:
                if child.text and child.text.strip() and not len(child):
                    key = child.tag
                    if child.get("lang") not in (None, "en", "en_GB", "en_US"):
                        continue
                    metadata.setdefault(key, child.text.strip())
    return _Parsed(dict(root.attrib), imports, points, repo_urls, metadata)


_ATTR_RE = re.compile(r'([\w:.-]+)\s*=\s*(?:"([^"]*)"|\'([^\']*)\')')


def _attrs(text: str) -> Dict[str, str]:
    return {m.group(1): m.group(2) if m.group(2) is not None else m.group(3)
            for m in _ATTR_RE.finditer(text)}


def _parse_recover(text: str) -> Optional[_Parsed]:
    """Pattern-based recovery for damaged manifests; None when no <addon> tag survives."""
    head = re.search(r"<addon\b([^>]*)>?", text)
    if head is None:
        return None
    imports = []
    for m in re.finditer(r"<import\b([^>]*)/?>", text):
        a = _attrs(m.group(1))
        if "addon" in a:
            imports.append((a["addon"], a.get("version")))
    points = [(_attrs(m.group(1)).get("point", ""), _attrs(m.group(1)))
              for m in re.finditer(r"<extension\b([^>]*)>", text)]
    repo_urls = {}
    for tag in ("info", "checksum", "datadir"):
        m = re.search(rf"<{tag}\b[^>]*>([^<]+)", text)
        if m:
            repo_urls[tag] = m.group(1).strip()
    metadata = {}
    for tag in ("summary", "description", "website", "source", "forum", "email", "license"):
        m = re.search(rf"<{tag}\b(?![^>]*lang=\"(?!en)[^\"]*\")[^>]*>([^<]+)", text)
        if m and m.group(1).strip():
            metadata[tag] = m.group(1).strip()
    return _Parsed(_attrs(head.group(1)), imports, points, repo_urls, metadata, recovered=True)


def _read_text(raw: bytes) -> str:
    if raw.startswith(b"\xef\xbb\xbf"):
        raw = raw[3:]
    return raw.decode("utf-8", "replace")


def _hash_code(source: EvidenceSource, addon_dir: str) -> Tuple[List[CodeFile], List[str]]:
    files, urls = [], set()
    for rel, entries in source.walk_dirs(addon_dir):
        for e in entries:
            if e.kind != "file" or not e.name.lower().endswith(".py"):
                continue
            try:
                data = source.read_file(e.relative_path)
            except (FileTooLarge, SymlinkRefused, PermissionError):
                continue
            entry = source.manifest_entry(e.relative_path)
            lines = data.count(b"\n") + (1 if data and not data.endswith(b"\n") else 0)
            files.append(CodeFile(e.relative_path, entry.sha256, lines))
            for m in URL_RE.finditer(data.decode("utf-8", "replace")):
                urls.add(m.group(0).rstrip(".,;:"))
    files.sort(key=lambda c: c.relative_path)
    return files, sorted(urls)


def inspect_addon(source: EvidenceSource, addon_dir: str, strict: bool = False
                  ) -> Optional[AddonManifest]:
    """Manifest for one add-on folder, or None when it holds no metadata file."""
    entries = source.listdir(addon_dir)
    by_lower = {e.name.lower(): e for e in entries}
    manifest_entry = next((by_lower[n] for n in MANIFEST_NAMES
                           if n in by_lower and by_lower[n].kind == "file"), None)
    if manifest_entry is None:
        return None
    folder = addon_dir.rsplit("/", 1)[-1]
    anomalies: List[dict] = []
    raw = source.read_file(manifest_entry.relative_path)
    text = _read_text(raw)
    parsed: Optional[_Parsed] = None
    try:
        parsed = _parse_tree(text)
    except ET.ParseError as exc:
        anomalies.append({"kind": "MalformedManifest", "detail": str(exc)})
        if not strict:
            parsed = _parse_recover(text)
            if parsed is not None:
                anomalies.append({"kind": "ManifestRecovered",
                                  "detail": "fields recovered by pattern scan"})
    if parsed is None:
        parsed = _Parsed({}, [], [], {}, {})
    addon_id = parsed.attrs.get("id") or folder
    if parsed.attrs.get("id") is None:
        anomalies.append({"kind": "MissingId", "detail": f"id taken from folder name {folder!r}"})
    elif addon_id != folder:
        anomalies.append({"kind": "IdMismatch",
                          "detail": f"manifest id {addon_id!r} differs from folder {folder!r}"})
    code_entries = [a.get("library") for p, a in parsed.points
                    if p in ("xbmc.python.pluginsource", "xbmc.python.script", "xbmc.service")
                    and a.get("library")]
    names = set(by_lower)
    has_code = any(c.lower() in names for c in code_entries) or \
        any(n in names for n in CODE_ENTRY_NAMES)
    has_license = any(LICENSE_RE.match(e.name) and e.kind == "file" for e in entries)
    code_files, code_urls = _hash_code(source, addon_dir)
    update_url = parsed.repo_urls.get("info")
    return AddonManifest(
        addon_id=addon_id,
        version=parsed.attrs.get("version", ""),
        kind=_kind(addon_id, parsed.points),
        dir_path=addon_dir,
        provider=parsed.attrs.get("provider-name"),
        name=parsed.attrs.get("name"),
        dependencies=parsed.imports,
        update_url=update_url,
        has_code=has_code,
        has_license=has_license,
        manifest_file=manifest_entry.relative_path,
        manifest_sha256=source.manifest_entry(manifest_entry.relative_path).sha256,
        extension_points=[p for p, _ in parsed.points],
        repository_urls=parsed.repo_urls,
        metadata=parsed.metadata,
        code_files=code_files,
        code_urls=code_urls,
        anomalies=anomalies,
    )


def inventory_addons(source: EvidenceSource, addons_dir: str, strict: bool = False) -> AddonInventory:
    if not source.is_dir(addons_dir):
        raise DirNotFound(f"addons directory not found: {addons_dir}")
    manifests, anomalies = [], []
    for e in source.listdir(addons_dir):
        if e.name.lower() in SKIP_DIRS and e.kind == "dir":
            continue
        if e.kind == "symlink":
            anomalies.append({"kind": "UnreadableEntry", "path": e.relative_path,
                              "detail": "symbolic link not followed"})
            continue
        if e.kind != "dir":
            continue
        try:
            m = inspect_addon(source, e.relative_path, strict)
        except (OSError, FileTooLarge) as exc:
            anomalies.append({"kind": "UnreadableEntry", "path": e.relative_path, "detail": str(exc)})
            continue
        if m is None:
            anomalies.append({"kind": "UnreadableEntry", "path": e.relative_path,
                              "detail": "no addon.xml metadata file"})
            continue
        manifests.append(m)
    manifests.sort(key=lambda m: (m.addon_id, m.dir_path))
    return AddonInventory(manifests, anomalies)


def inspect_addons(source: EvidenceSource, addons_dir: str, strict: bool = False) -> List[AddonManifest]:
    """One manifest per add-on folder, ordered by add-on id."""
    return inventory_addons(source, addons_dir, strict).manifests


# -- packages -----------------------------------------------------------------

def _dos_time(d: int, t: int) -> Optional[datetime]:
    try:
        return datetime(((d >> 9) & 0x7F) + 1980, (d >> 5) & 0x0F, d & 0x1F,
                        (t >> 11) & 0x1F, (t >> 5) & 0x3F, (t & 0x1F) * 2)
    except ValueError:
        return None


def scan_local_headers(data: bytes) -> List[Tuple[str, Optional[datetime]]]:
    """Entries found by walking local file headers; works on truncated archives."""
    out = []
    pos = data.find(b"PK\x03\x04")
    while 0 <= pos and pos + _LOCAL_HEADER.size <= len(data):
        (_sig, _ver, flags, _method, mtime, mdate, _crc, csize, _usize,
         nlen, xlen) = _LOCAL_HEADER.unpack_from(data, pos)
        name_end = pos + _LOCAL_HEADER.size + nlen
        if name_end > len(data):
            break
        name = data[pos + _LOCAL_HEADER.size:name_end].decode("utf-8" if flags & 0x800 else "cp437",
                                                               "replace")
        out.append((name, _dos_time(mdate, mtime)))
        nxt = name_end + xlen + (0 if flags & 0x08 else csize)
        pos = data.find(b"PK\x03\x04", max(nxt, pos + 4))
    return out


def _entry_time(info: zipfile.ZipInfo) -> Optional[datetime]:
    try:
        return datetime(*info.date_time)
    except ValueError:
        return None


def _zip_times(data: bytes) -> Tuple[List[Tuple[str, Optional[datetime]]], Optional[str]]:
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            return [(i.filename, _entry_time(i)) for i in zf.infolist()], "central_directory"
    except (zipfile.BadZipFile, ValueError, OSError):
        entries = scan_local_headers(data)
        return entries, ("local_headers" if entries else None)


def parse_package_name(zip_name: str) -> Tuple[str, Optional[str], bool]:
    """``(addon_id, version, nonstandard)`` from an ``id-version.zip`` name."""
    m = PACKAGE_RE.match(zip_name)
    if m:
        return m.group("id"), m.group("version"), False
    stem = zip_name[:-4] if zip_name.lower().endswith(".zip") else zip_name
    return stem, None, True


def inspect_packages(source: EvidenceSource, packages_dir: str) -> List[PackageArtifact]:
    if not source.is_dir(packages_dir):
        raise DirNotFound(f"packages directory not found: {packages_dir}")
    out = []
    for e in source.listdir(packages_dir):
        if e.kind != "file" or not e.name.lower().endswith(".zip"):
            continue
        addon_id, version, nonstandard = parse_package_name(e.name)
        st = source.stat(e.relative_path)
        anomalies: List[dict] = []
        try:
            data = source.read_file(e.relative_path)
            entries, how = _zip_times(data)
            sha = source.manifest_entry(e.relative_path).sha256
        except FileTooLarge:
            sha = source.hash_file(e.relative_path).sha256
            entries, how = [], None
            anomalies.append({"kind": "TooLargeToOpen", "detail": "hashed only"})
        if how == "local_headers":
            anomalies.append({"kind": "CentralDirectoryMissing",
                              "detail": "entry times read from local file headers"})
        times = sorted(t for _, t in entries if t is not None)
        internal = None
        if times:
            internal = (Timestamp(times[0], ClockTrust.LOCAL_UNTRUSTED),
                        Timestamp(times[-1], ClockTrust.LOCAL_UNTRUSTED))
        out.append(PackageArtifact(
            zip_name=e.name,
            relative_path=e.relative_path,
            implied_addon_id=addon_id,
            implied_version=version,
            nonstandard_name=nonstandard,
            file_mtime=from_epoch_utc(st.st_mtime),
            sha256=sha,
            zip_internal_times=internal,
            entry_count=len(entries),
            zip_source=how,
            anomalies=anomalies,
        ))
    out.sort(key=lambda p: p.zip_name)
    return out


# -- cross reference ----------------------------------------------------------

def cross_reference(manifests: Iterable[AddonManifest], addon_records: Iterable[AddonRecord],
                    packages: Iterable[PackageArtifact] = ()) -> List[Discrepancy]:
    """Disagreements between add-on folders and database rows, ordered by kind then id."""
    disk = {m.addon_id: m for m in manifests}
    live: Dict[str, AddonRecord] = {}
    carved: Dict[str, AddonRecord] = {}
    for r in addon_records:
        target = live if r.liveness is Liveness.LIVE else carved
        target.setdefault(r.addon_id, r)
    pkgs: Dict[str, List[str]] = {}
    for p in packages:
        pkgs.setdefault(p.implied_addon_id, []).append(p.zip_name)
    out: List[Discrepancy] = []
    for aid in sorted(disk):
        if aid not in live and aid not in carved:
            out.append(Discrepancy(DiscrepancyKind.DISK_ONLY, aid,
                                   {"dir_path": disk[aid].dir_path, "version": disk[aid].version}))
    for aid in sorted(live):
        if aid not in disk:
            out.append(Discrepancy(DiscrepancyKind.DB_ONLY_LIVE, aid,
                                   {"packages": sorted(pkgs.get(aid, []))}))
    for aid in sorted(carved):
        if aid not in disk and aid not in live:
            rec = carved[aid]
            out.append(Discrepancy(DiscrepancyKind.DB_ONLY_CARVED, aid, {
                "liveness": rec.liveness.value,
                "install_date": rec.install_date.render() if rec.install_date else None,
                "packages": sorted(pkgs.get(aid, [])),
            }))
    for aid in sorted(disk):
        rec = live.get(aid)
        if rec is not None and rec.version and disk[aid].version and rec.version != disk[aid].version:
            out.append(Discrepancy(DiscrepancyKind.VERSION_MISMATCH, aid,
                                   {"disk_version": disk[aid].version, "db_version": rec.version}))
    return out
