"""Reference databases written by the stdlib sqlite3 module, plus a dump oracle."""
from __future__ import annotations

import random
import sqlite3
from pathlib import Path
from typing import Callable, Dict, List, Tuple

Dump = Dict[str, List[tuple]]


def ref_varint(buf: bytes, off: int) -> Tuple[int, int]:
    """Straight transcription of the varint rule: 7 bits per byte, full 9th byte."""
    v = 0
    for i in range(8):
        c = buf[off + i]
        v = (v << 7) | (c & 0x7F)
        if c < 0x80:
            return v, i + 1
    v = (v << 8) | buf[off + 8]
    return (v - (1 << 64) if v >= 1 << 63 else v), 9


def ref_encode_varint(v: int) -> bytes:
    v &= (1 << 64) - 1
    if v >= 1 << 56:
        out = [v & 0xFF]
        v >>= 8
        for _ in range(8):
            out.append((v & 0x7F) | 0x80)
            v >>= 7
        return bytes(reversed(out))
    out = [v & 0x7F]
    v >>= 7
    while v:
        out.append((v & 0x7F) | 0x80)
        v >>= 7
    return bytes(reversed(out))


def reference_dump(path: Path) -> Dump:
    """Every ordinary rowid table, rows ordered by rowid, as the engine reports them."""
    con = sqlite3.connect(str(path))
    con.text_factory = lambda b: b.decode("utf-8", "surrogateescape")
    out = {}
    names = [r[0] for r in con.execute(
        "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%' "
        "AND sql NOT LIKE '%WITHOUT ROWID%'")]
    for name in names:
        cols = [r[1] for r in con.execute(f'PRAGMA table_info("{name}")')]
        sel = ", ".join(f'"{c}"' for c in cols)
        out[name] = [tuple(r) for r in con.execute(f'SELECT rowid, {sel} FROM "{name}" ORDER BY rowid')]
    con.close()
    return out


def _rand_value(rng: random.Random):
    k = rng.randrange(6)
    if k == 0:
        return None
    if k == 1:
        return rng.choice([0, 1, -1, 127, -128, 32767, 2 ** 23, 2 ** 31 - 1, -2 ** 47, 2 ** 62,
                           -2 ** 63, rng.randrange(-10 ** 12, 10 ** 12)])
    if k == 2:
        return rng.uniform(-1e6, 1e6)
    if k == 3:
        return "".join(rng.choice("abcdefghijklmnop qrstuvwxyzé中") for _ in range(rng.randrange(0, 40)))
    if k == 4:
        return bytes(rng.randrange(256) for _ in range(rng.randrange(0, 30)))
    return rng.randrange(100)


def _fill(con, table: str, ncols: int, nrows: int, rng: random.Random):
    marks = ",".join("?" * ncols)
    con.executemany(f"INSERT INTO {table} VALUES ({marks})",
                    [tuple(_rand_value(rng) for _ in range(ncols)) for _ in range(nrows)])


def _mixed(path, page_size=4096, encoding=None, rows=300, seed=1, auto_vacuum=None):
    rng = random.Random(seed)
    con = sqlite3.connect(str(path))
    con.execute(f"PRAGMA page_size={page_size}")
    if encoding:
        con.execute(f'PRAGMA encoding="{encoding}"')
    if auto_vacuum:
        con.execute(f"PRAGMA auto_vacuum={auto_vacuum}")
    con.execute("CREATE TABLE t (a, b TEXT, c INTEGER, d REAL, e BLOB)")
    con.execute("CREATE TABLE u (id INTEGER PRIMARY KEY, name TEXT NOT NULL, note)")
    _fill(con, "t", 5, rows, rng)
    con.executemany("INSERT INTO u (name, note) VALUES (?, ?)",
                    [(f"name{i}", _rand_value(rng)) for i in range(rows // 2)])
    con.execute("CREATE INDEX ix_t ON t(b)")
    if auto_vacuum:
        con.execute("DELETE FROM t WHERE rowid % 3 = 0")
    con.commit()
    con.close()


def _overflow(path):
    con = sqlite3.connect(str(path))
    con.execute("PRAGMA page_size=1024")
    con.execute("CREATE TABLE big (id INTEGER PRIMARY KEY, txt TEXT, data BLOB)")
    rng = random.Random(5)
    for i in range(40):
        n = rng.choice([900, 1500, 5000, 20000, 70000])
        con.execute("INSERT INTO big (txt, data) VALUES (?, ?)",
                    ("x" * (n // 3) + str(i), bytes(rng.randrange(256) for _ in range(n))))
    con.commit()
    con.close()


def _many_tables(path):
    con = sqlite3.connect(str(path))
    rng = random.Random(9)
    for i in range(130):
        con.execute(f"CREATE TABLE tbl{i:03d} (k INTEGER PRIMARY KEY, v TEXT, w)")
        con.executemany(f"INSERT INTO tbl{i:03d} (v, w) VALUES (?, ?)",
                        [(f"r{j}", _rand_value(rng)) for j in range(rng.randrange(0, 8))])
    con.commit()
    con.close()


def _altered(path):
    con = sqlite3.connect(str(path))
    con.execute("CREATE TABLE a (id INTEGER PRIMARY KEY, x TEXT)")
    con.executemany("INSERT INTO a (x) VALUES (?)", [(f"old{i}",) for i in range(50)])
    con.execute("ALTER TABLE a ADD COLUMN y INTEGER")
    con.execute("ALTER TABLE a ADD COLUMN z TEXT")
    con.executemany("INSERT INTO a (x, y, z) VALUES (?, ?, ?)",
                    [(f"new{i}", i, f"z{i}") for i in range(50)])
    con.commit()
    con.close()


def _deep_tree(path):
    con = sqlite3.connect(str(path))
    con.execute("PRAGMA page_size=512")
    con.execute("CREATE TABLE deep (id INTEGER PRIMARY KEY, v TEXT)")
    con.executemany("INSERT INTO deep (v) VALUES (?)", [(f"value-{i:06d}",) for i in range(6000)])
    con.commit()
    con.close()


def _sparse_rowids(path):
    con = sqlite3.connect(str(path))
    con.execute("CREATE TABLE s (id INTEGER PRIMARY KEY, v)")
    con.executemany("INSERT INTO s VALUES (?, ?)",
                    [(-(2 ** 63), "min"), (-5, "neg"), (0, "zero"), (2 ** 40, "big"),
                     (2 ** 63 - 1, "max")])
    con.commit()
    con.close()


BUILDERS: Dict[str, Callable[[Path], None]] = {
    "mixed_4096": lambda p: _mixed(p),
    "mixed_512": lambda p: _mixed(p, page_size=512, seed=2),
    "mixed_65536": lambda p: _mixed(p, page_size=65536, seed=3),
    "utf16le": lambda p: _mixed(p, encoding="UTF-16le", seed=4),
    "utf16be": lambda p: _mixed(p, encoding="UTF-16be", seed=5),
    "auto_vacuum_full": lambda p: _mixed(p, auto_vacuum="FULL", seed=6),
    "auto_vacuum_incremental": lambda p: _mixed(p, auto_vacuum="INCREMENTAL", seed=7),
    "overflow": _overflow,
    "many_tables": _many_tables,
    "altered": _altered,
    "deep_tree": _deep_tree,
    "sparse_rowids": _sparse_rowids,
}


def build_all(directory: Path) -> Dict[str, Path]:
    directory.mkdir(parents=True, exist_ok=True)
    out = {}
    for name, build in BUILDERS.items():
        p = directory / f"{name}.db"
        if p.exists():
            p.unlink()
        build(p)
        out[name] = p
    return out
