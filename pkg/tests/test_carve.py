import random
import sqlite3

import pytest

from streamtrace.sqlite import kernels
from streamtrace.sqlite.carve import carve_deleted, carve_summary
from streamtrace.sqlite.format import Liveness, open_database

from kodi_fixtures import addon_row, make_addons_db

IMPLS = kernels.available()
ROWS = 120


def deletion_fixture(tmp_path, k: int, vacuum: bool = False, seed: int = 0):
    rows = [addon_row(i) for i in range(1, ROWS + 1)]
    ids = random.Random(seed * 1000 + k).sample(range(1, ROWS + 1), k)
    path = tmp_path / f"Addons27_k{k}{'_vac' if vacuum else ''}.db"
    deleted = make_addons_db(path, rows, ids, vacuum=vacuum)
    return path, deleted


def text_values(row: tuple):
    return [v for v in row if isinstance(v, str)]


def recovered_rows(path, deleted, impl=None):
    """Deleted rows whose every text value appears verbatim in one carved record."""
    db = open_database(path.read_bytes(), path.name)
    carved = [r for r in carve_deleted(db, impl=impl) if r.table == "installed"]
    value_sets = [[v.value for v in r.values] for r in carved]
    hits = set()
    for rid, row in deleted.items():
        want = text_values(row)
        if any(all(w in vals for w in want) for vals in value_sets):
            hits.add(rid)
    return hits, carved


def recovery_rate(tmp_path, k, impl=None) -> float:
    path, deleted = deletion_fixture(tmp_path, k)
    hits, _ = recovered_rows(path, deleted, impl)
    return len(hits) / len(deleted)


@pytest.mark.parametrize("impl", IMPLS)
@pytest.mark.parametrize("k", [1, 5, 20])
def test_recovers_most_deleted_rows(tmp_path, impl, k):
    assert recovery_rate(tmp_path, k, kernels.load(impl)) >= 0.90


@pytest.mark.parametrize("k", [1, 5, 20])
def test_nothing_after_vacuum(tmp_path, k):
    path, deleted = deletion_fixture(tmp_path, k, vacuum=True)
    hits, carved = recovered_rows(path, deleted)
    assert hits == set()
    assert carved == []


def test_no_false_positives_or_duplicates(tmp_path):
    path, deleted = deletion_fixture(tmp_path, 20)
    _, carved = recovered_rows(path, deleted)
    gone = {row[1] for row in deleted.values()}
    names = [r.values[1].value for r in carved]
    assert len(names) == len(set(names))
    assert set(names) <= gone


def test_kernels_agree(tmp_path):
    if len(IMPLS) < 2:
        pytest.skip("compiled kernels not built")
    path, _ = deletion_fixture(tmp_path, 20)
    db = open_database(path.read_bytes())
    out = {}
    for impl in IMPLS:
        out[impl] = [r.to_dict() for r in carve_deleted(db, impl=kernels.load(impl))]
    assert out["python"] == out["compiled"]


def test_live_rows_are_never_reported(tmp_path):
    path = tmp_path / "live.db"
    make_addons_db(path, [addon_row(i) for i in range(1, 50)])
    db = open_database(path.read_bytes())
    assert [r for r in carve_deleted(db) if r.table == "installed"] == []


def test_freelist_pages_are_carved(tmp_path):
    path = tmp_path / "freelist.db"
    con = sqlite3.connect(str(path))
    con.execute("PRAGMA secure_delete=off")
    con.execute("CREATE TABLE keep (id INTEGER PRIMARY KEY, v TEXT)")
    con.execute("CREATE TABLE gone (id INTEGER PRIMARY KEY, name TEXT NOT NULL, note TEXT)")
    con.executemany("INSERT INTO gone (name, note) VALUES (?, ?)",
                    [(f"deleted-name-{i:04d}", f"note {i}") for i in range(400)])
    con.execute("INSERT INTO keep (v) VALUES ('x')")
    con.commit()
    con.execute("DELETE FROM gone")
    con.commit()
    con.close()
    db = open_database(path.read_bytes())
    assert db.header.freelist_count > 0
    carved = list(carve_deleted(db))
    kinds = carve_summary(carved)
    assert kinds.get(Liveness.CARVED_FREELIST.value, 0) > 0
    names = {r.values[1].value for r in carved if r.table == "gone"}
    assert len(names) >= 0.9 * 400


def test_utf16_freeblock_carving(tmp_path):
    path = tmp_path / "u16.db"
    con = sqlite3.connect(str(path))
    con.execute('PRAGMA encoding="UTF-16le"')
    con.execute("PRAGMA secure_delete=off")
    con.execute("CREATE TABLE t (id INTEGER PRIMARY KEY, name TEXT NOT NULL, other TEXT)")
    con.executemany("INSERT INTO t (name, other) VALUES (?, ?)",
                    [(f"entry{i:03d}", "plugin://x") for i in range(30)])
    con.commit()
    con.execute("DELETE FROM t WHERE id = 7")
    con.commit()
    con.close()
    carved = list(carve_deleted(open_database(path.read_bytes())))
    assert "entry006" in {r.values[1].value for r in carved}


def test_carving_does_not_change_live_walk(tmp_path):
    path, _ = deletion_fixture(tmp_path, 5)
    db = open_database(path.read_bytes())
    before = [r.to_dict() for r in db.walk_table(db.tables()["installed"].root_page)]
    list(carve_deleted(db))
    after = [r.to_dict() for r in db.walk_table(db.tables()["installed"].root_page)]
    assert before == after and len(before) == ROWS - 5
