import hashlib
import os
from datetime import datetime, timezone

import pytest

from streamtrace.errors import FileTooLarge, PathEscapesRoot, SymlinkRefused
from streamtrace.evidence import manifest_json, open_source

FIXED = datetime(2020, 1, 2, 3, 4, 5, tzinfo=timezone.utc)


@pytest.fixture
def tree(tmp_path):
    root = tmp_path / "root"
    (root / "a" / "b").mkdir(parents=True)
    (root / "a" / "b" / "f.bin").write_bytes(b"evidence bytes")
    (root / "top.txt").write_text("top")
    (tmp_path / "outside.txt").write_text("secret")
    os.symlink(tmp_path / "outside.txt", root / "a" / "link")
    os.symlink(root / "a" / "b", root / "dirlink")
    return root


def src(root, **kw):
    return open_source(root, "CASE-1", "examiner", clock=lambda: FIXED, **kw)


def test_read_records_hash(tree):
    s = src(tree)
    data = s.read_file("a/b/f.bin")
    entry = s.manifest_entry("a/b/f.bin")
    assert entry.sha256 == hashlib.sha256(data).hexdigest()
    assert entry.size_bytes == len(data)
    assert entry.read_at == FIXED


def test_paths_normalize_and_windows_separators(tree):
    s = src(tree)
    assert s.read_file("a\\b\\f.bin") == b"evidence bytes"
    assert s.read_file("./a/./b/../b/f.bin") == b"evidence bytes"
    assert [e.relative_path for e in s.export_manifest()] == ["a/b/f.bin"]


@pytest.mark.parametrize("bad", ["../outside.txt", "/etc/passwd", "a/../../x", "C:\\x"])
def test_escapes_are_refused(tree, bad):
    with pytest.raises(PathEscapesRoot):
        src(tree).read_file(bad)


def test_symlinks_not_followed_but_recorded(tree):
    s = src(tree)
    with pytest.raises(SymlinkRefused):
        s.read_file("a/link")
    with pytest.raises(SymlinkRefused):
        s.read_file("dirlink/f.bin")
    entry = s.manifest_entry("a/link")
    assert entry.kind == "symlink"
    assert entry.sha256 == hashlib.sha256(os.fsencode(entry.target)).hexdigest()


def test_walk_never_enters_links(tree):
    s = src(tree)
    seen = [rel for rel, _ in s.walk_dirs()]
    assert seen == ["", "a", "a/b"]


def test_large_files_use_range_reader(tree):
    s = src(tree, max_read_bytes=4)
    with pytest.raises(FileTooLarge):
        s.read_file("a/b/f.bin")
    reader = s.open_reader("a/b/f.bin")
    assert reader.read_at(9, 5) == b"bytes"
    assert s.manifest_entry("a/b/f.bin").sha256 == hashlib.sha256(b"evidence bytes").hexdigest()


def test_root_must_be_directory(tree):
    with pytest.raises(NotADirectoryError):
        open_source(tree / "top.txt", "c", "e")


def test_manifest_sorted_and_first_read_wins(tree):
    times = iter([FIXED, datetime(2030, 1, 1, tzinfo=timezone.utc)] * 3)
    s = open_source(tree, "c", "e", clock=lambda: next(times))
    s.read_file("top.txt")
    s.read_file("a/b/f.bin")
    s.read_file("top.txt")
    paths = [e.relative_path for e in s.export_manifest()]
    assert paths == sorted(paths)
    assert manifest_json(s.export_manifest()).endswith(b"\n")


def test_reads_do_not_modify_tree(tree):
    before = {p: (p.stat().st_mtime_ns, p.read_bytes()) for p in tree.rglob("*")
              if p.is_file() and not p.is_symlink()}
    s = src(tree)
    for rel, entries in s.walk_dirs():
        for e in entries:
            if e.kind == "file":
                s.read_file(e.relative_path)
    after = {p: (p.stat().st_mtime_ns, p.read_bytes()) for p in tree.rglob("*")
             if p.is_file() and not p.is_symlink()}
    assert before == after
