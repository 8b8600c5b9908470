"""Acceptance suite: one test per criterion, summarized as PASS/FAIL lines.

Run directly (``python tests/test_acceptance.py``) or through pytest; the
summary is printed at the end of the session either way.
"""
import sqlite3
import time

import pytest

from streamtrace.cli import main
from streamtrace.evidence import open_source
from streamtrace.locator import scan
from streamtrace.pipeline import RunConfig, run
from streamtrace.sqlite.format import open_database

from kodi_fixtures import (addon_row, build_reference_tree, make_addons_db, make_installation,
                           make_session_log, tree_digest)
from oracle_dbs import BUILDERS, build_all, reference_dump
from test_carve import deletion_fixture, recovered_rows
from test_logs import category_mismatches, corpus
from test_sqlite import rows_of, strictly_equal
from timeline_props import run_property_check

LOCATOR_SECONDS = 5.0
ORACLE_SECONDS = 10.0
MIN_PAGES = 8
CARVE_RATE = 0.90
PROPERTY_SETS = 10_000


@pytest.mark.criterion(1, "locator finds 4 installations with platform and version tags (< 5 s)")
def test_locator_completeness(tmp_path):
    root = build_reference_tree(tmp_path / "tree")
    t0 = time.perf_counter()
    installs = scan(open_source(root, "acc", "acc"))
    elapsed = time.perf_counter() - t0
    got = sorted((i.platform, i.version_hint.database_suffix, i.version_hint.release_name)
                 for i in installs)
    assert got == [("Android", 27, "Leia 18.x"), ("LinuxDesktop", 19, "Isengard 15.2"),
                   ("OSMC", 33, "Nexus 20.x"), ("Windows", 27, "Leia 18.x")]
    assert elapsed < LOCATOR_SECONDS


@pytest.mark.criterion(2, "table walk equals reference dump on >= 10 databases (< 10 s)")
def test_sqlite_oracle_equivalence(tmp_path):
    dbs = build_all(tmp_path / "oracle")
    assert len(dbs) >= 10 and {"overflow", "many_tables"} <= set(BUILDERS)
    t0 = time.perf_counter()
    mismatches = []
    for name, path in dbs.items():
        want = reference_dump(path)
        db = open_database(path.read_bytes(), path.name)
        for table, rows in want.items():
            got = rows_of(db, table)
            if len(got) != len(rows) or not all(strictly_equal(g, w) for g, w in zip(got, rows)):
                mismatches.append((name, table))
    elapsed = time.perf_counter() - t0
    many = sqlite3.connect(str(dbs["many_tables"]))
    assert many.execute("SELECT count(*) FROM sqlite_master WHERE type='table'").fetchone()[0] > 100
    many.close()
    assert mismatches == []
    assert elapsed < ORACLE_SECONDS


@pytest.mark.criterion(3, "fresh Kodi-schema database has page_count >= 8")
def test_minimum_pages(tmp_path):
    p = tmp_path / "Addons27.db"
    make_addons_db(p)
    db = open_database(p.read_bytes())
    assert db.page_count >= MIN_PAGES


@pytest.mark.criterion(4, "carving recovers >= 90% of deleted rows (K=1,5,20); 0 after vacuum")
@pytest.mark.parametrize("k", [1, 5, 20])
def test_carving_recovery(tmp_path, k):
    path, deleted = deletion_fixture(tmp_path, k)
    hits, _ = recovered_rows(path, deleted)
    assert len(hits) / len(deleted) >= CARVE_RATE
    vpath, vdeleted = deletion_fixture(tmp_path, k, vacuum=True)
    vhits, vcarved = recovered_rows(vpath, vdeleted)
    assert len(vhits) == 0 and vcarved == []


@pytest.mark.criterion(5, "log corpus: 0 category mismatches, exact line conservation")
def test_log_corpus():
    from streamtrace.logs import parse_log, split_lines
    data, ann = corpus()
    assert len(ann) >= 200
    events, _ = parse_log(data)
    assert category_mismatches(events, ann) == []
    assert sum(1 + e.continuation_lines for e in events) == len(split_lines(data)) == len(ann)


@pytest.mark.criterion(6, "single current log produces the preservation warning")
def test_single_log_warning(tmp_path):
    root = tmp_path / "tree"
    make_installation(root / "home/osmc/.kodi", installed=[addon_row(1)],
                      current_log=make_session_log())
    result = run(open_source(root, "acc", "acc"), RunConfig(root=root))
    kinds = [w["kind"] for w in result.report.warnings]
    assert kinds.count("previous_session_log_absent") == 1


@pytest.mark.criterion(7, "exactly one DiskOnly and one DbOnlyCarved discrepancy")
def test_cross_reference(tmp_path):
    root = tmp_path / "tree"
    rows = [addon_row(i) for i in range(1, 11)]
    uninstalled = 7
    on_disk = [r[1] for r in rows if r[0] != uninstalled] + ["plugin.video.sideloaded"]
    make_installation(root / "home/osmc/.kodi", installed=rows, delete_ids=[uninstalled],
                      disk_addons=on_disk, current_log=make_session_log())
    result = run(open_source(root, "acc", "acc"), RunConfig(root=root))
    got = sorted((d["kind"], d["addon_id"]) for d in result.report.discrepancies)
    assert got == [("DbOnlyCarved", rows[uninstalled - 1][1]),
                   ("DiskOnly", "plugin.video.sideloaded")]


@pytest.mark.criterion(8, "two fixed-clock report runs are byte-identical; evidence unchanged")
def test_determinism_and_immutability(tmp_path, capsys):
    root = build_reference_tree(tmp_path / "tree")
    before = tree_digest(root)
    outs = []
    for n in (1, 2):
        out = tmp_path / f"out{n}"
        assert main(["report", "--root", str(root), "--out", str(out), "--formats", "json,csv,html",
                     "--case-id", "ACC", "--examiner", "acc", "--fixed-clock"]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"manifest.json", "report.csv", "report.html", "report.json"}
    assert tree_digest(root) == before


@pytest.mark.criterion(9, "timeline order: 10,000 random event sets, 0 violations")
def test_timeline_total_order():
    assert run_property_check(PROPERTY_SETS, seed=12345) == 0


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
