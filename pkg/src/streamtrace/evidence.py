"""Rooted, read-only access to a mounted evidence tree.

Every file whose bytes are consumed is hashed (SHA-256) into a manifest so
the resulting report can be tied back to the exact evidence that produced it.
Nothing in here ever opens a file for writing.
"""
from __future__ import annotations

import hashlib
import json
import os
import stat
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path, PurePosixPath
from typing import Callable, Iterator, List, Optional, Tuple

from .errors import FileTooLarge, PathEscapesRoot, SymlinkRefused
from .timestamps import rfc3339_utc

DEFAULT_MAX_READ = 1 << 30
_CHUNK = 1 << 20

Clock = Callable[[], datetime]


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class HashManifestEntry:
    relative_path: str
    sha256: str
    size_bytes: int
    read_at: datetime
    kind: str = "file"
    target: Optional[str] = None

    def to_dict(self) -> dict:
        d = {
            "path": self.relative_path,
            "sha256": self.sha256,
            "size": self.size_bytes,
            "read_at": rfc3339_utc(self.read_at),
        }
        if self.kind != "file":
            d["kind"] = self.kind
            d["target"] = self.target
        return d


@dataclass
class DirEntry:
    name: str
    relative_path: str
    kind: str  # "dir", "file", "symlink" or "other"


class RangeReader:
    """Ranged access to one evidence file; used for files too big to slurp."""

    def __init__(self, path: Path, relative_path: str, size: int):
        self._path = path
        self.relative_path = relative_path
        self.size = size

    def read_at(self, offset: int, length: int) -> bytes:
        if offset < 0 or length <= 0 or offset >= self.size:
            return b""
        fd = os.open(self._path, os.O_RDONLY | getattr(os, "O_BINARY", 0))
        try:
            return os.pread(fd, length, offset)
        finally:
            os.close(fd)


@dataclass
class EvidenceSource:
    root_path: Path
    case_id: str
    examiner: str
    opened_at: datetime
    max_read_bytes: int = DEFAULT_MAX_READ
    clock: Clock = field(default=utc_now, repr=False)
    _manifest: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    # -- path handling -----------------------------------------------------

    def normalize(self, relative_path) -> str:
        """Return the canonical posix form of *relative_path* or raise PathEscapesRoot."""
        text = str(relative_path).replace("\\", "/")
        if text.startswith("/") or (len(text) > 1 and text[1] == ":"):
            raise PathEscapesRoot(f"absolute path not allowed: {relative_path!r}")
        parts: List[str] = []
        for part in PurePosixPath(text).parts:
            if part in ("", "."):
                continue
            if part == "..":
                if not parts:
                    raise PathEscapesRoot(f"path escapes evidence root: {relative_path!r}")
                parts.pop()
                continue
            parts.append(part)
        return "/".join(parts)

    def _resolve(self, relative_path) -> Tuple[str, Path]:
        rel = self.normalize(relative_path)
        path = self.root_path
        for part in rel.split("/") if rel else []:
            path = path / part
            try:
                st = os.lstat(path)
            except FileNotFoundError:
                raise FileNotFoundError(f"not found in evidence: {rel}") from None
            if stat.S_ISLNK(st.st_mode):
                sub = path.relative_to(self.root_path).as_posix()
                self._note_symlink(sub, path)
                raise SymlinkRefused(f"symbolic link not followed: {sub}")
        return rel, path

    # -- manifest ----------------------------------------------------------

    def _record(self, entry: HashManifestEntry) -> HashManifestEntry:
        with self._lock:
            existing = self._manifest.get(entry.relative_path)
            if existing is not None:
                return existing
            self._manifest[entry.relative_path] = entry
            return entry

    def _note_symlink(self, rel: str, path: Path) -> None:
        if rel in self._manifest:
            return
        target = os.readlink(path)
        encoded = os.fsencode(target)
        self._record(HashManifestEntry(rel, hashlib.sha256(encoded).hexdigest(),
                                       len(encoded), self.clock(), "symlink", target))

    def manifest_entry(self, relative_path) -> Optional[HashManifestEntry]:
        return self._manifest.get(self.normalize(relative_path))

    def export_manifest(self) -> List[HashManifestEntry]:
        with self._lock:
            return sorted(self._manifest.values(), key=lambda e: e.relative_path)

    # -- reads -------------------------------------------------------------

    def read_file(self, relative_path) -> bytes:
        rel, path = self._resolve(relative_path)
        st = os.stat(path)
        if stat.S_ISDIR(st.st_mode):
            raise IsADirectoryError(rel)
        if st.st_size > self.max_read_bytes:
            self.hash_file(rel)
            raise FileTooLarge(f"{rel} is {st.st_size} bytes; use open_reader")
        with open(path, "rb") as fh:
            data = fh.read()
        self._record(HashManifestEntry(rel, hashlib.sha256(data).hexdigest(),
                                       len(data), self.clock()))
        return data

    def hash_file(self, relative_path) -> HashManifestEntry:
        """Stream-hash a file into the manifest without holding it in memory."""
        rel, path = self._resolve(relative_path)
        existing = self._manifest.get(rel)
        if existing is not None:
            return existing
        h = hashlib.sha256()
        size = 0
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(_CHUNK), b""):
                h.update(chunk)
                size += len(chunk)
        return self._record(HashManifestEntry(rel, h.hexdigest(), size, self.clock()))

    def open_reader(self, relative_path) -> RangeReader:
        entry = self.hash_file(relative_path)
        _, path = self._resolve(relative_path)
        return RangeReader(path, entry.relative_path, entry.size_bytes)

    # -- listing -----------------------------------------------------------

    def kind(self, relative_path) -> Optional[str]:
        """Kind of the entry at *relative_path* without following links, or None."""
        try:
            rel = self.normalize(relative_path)
        except PathEscapesRoot:
            return None
        path = self.root_path / rel if rel else self.root_path
        try:
            st = os.lstat(path)
        except OSError:
            return None
        for part_path in _ancestors(self.root_path, rel):
            if os.path.islink(part_path):
                return None
        return _kind_of(st.st_mode)

    def is_dir(self, relative_path) -> bool:
        return self.kind(relative_path) == "dir"

    def is_file(self, relative_path) -> bool:
        return self.kind(relative_path) == "file"

    def listdir(self, relative_path="") -> List[DirEntry]:
        rel, path = self._resolve(relative_path)
        out = []
        try:
            it = os.scandir(path)
        except (NotADirectoryError, PermissionError, FileNotFoundError):
            return []
        with it:
            for de in it:
                sub = f"{rel}/{de.name}" if rel else de.name
                try:
                    st = de.stat(follow_symlinks=False)
                except OSError:
                    out.append(DirEntry(de.name, sub, "other"))
                    continue
                kind = _kind_of(st.st_mode)
                if kind == "symlink":
                    self._note_symlink(sub, Path(de.path))
                out.append(DirEntry(de.name, sub, kind))
        out.sort(key=lambda e: e.name)
        return out

    def walk_dirs(self, relative_path="") -> Iterator[Tuple[str, List[DirEntry]]]:
        """Depth-first (sorted) walk yielding ``(dir, entries)``; links are never entered."""
        stack = [self.normalize(relative_path)]
        while stack:
            rel = stack.pop()
            entries = self.listdir(rel)
            yield rel, entries
            stack.extend(e.relative_path for e in reversed(entries) if e.kind == "dir")

    def stat(self, relative_path) -> os.stat_result:
        _, path = self._resolve(relative_path)
        return os.lstat(path)


def _ancestors(root: Path, rel: str):
    path = root
    for part in rel.split("/")[:-1] if rel else []:
        path = path / part
        yield path


def _kind_of(mode: int) -> str:
    if stat.S_ISLNK(mode):
        return "symlink"
    if stat.S_ISDIR(mode):
        return "dir"
    if stat.S_ISREG(mode):
        return "file"
    return "other"


def open_source(root, case_id: str, examiner: str, *, clock: Optional[Clock] = None,
                max_read_bytes: int = DEFAULT_MAX_READ) -> EvidenceSource:
    """Open *root* as a read-only evidence tree with an empty manifest."""
    root_path = Path(root)
    if not root_path.is_dir():
        raise NotADirectoryError(f"evidence root is not a directory: {root}")
    if not os.access(root_path, os.R_OK | os.X_OK):
        raise PermissionError(f"evidence root is not readable: {root}")
    clock = clock or utc_now
    return EvidenceSource(root_path.resolve(), case_id, examiner, clock(),
                          max_read_bytes=max_read_bytes, clock=clock)


def read_file(source: EvidenceSource, relative_path) -> bytes:
    return source.read_file(relative_path)


def export_manifest(source: EvidenceSource) -> List[HashManifestEntry]:
    return source.export_manifest()


def manifest_json(entries: List[HashManifestEntry]) -> bytes:
    """Serialize manifest entries as a JSON array (UTF-8, LF endings)."""
    text = json.dumps([e.to_dict() for e in entries], indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8", "backslashreplace")
