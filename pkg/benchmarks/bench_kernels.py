"""Compare the compiled and pure-Python byte kernels.

    python3 benchmarks/bench_kernels.py [--rows N] [--repeat R]

Varint decoding and carving of a database with many deleted rows run once per
kernel. Walking the live table goes through the kernel chosen at import, so it
is reported once.
"""
import argparse
import random
import sqlite3
import statistics
import tempfile
import time
from pathlib import Path

from streamtrace.sqlite import kernels
from streamtrace.sqlite.carve import carve_deleted
from streamtrace.sqlite.format import open_database


def make_db(path: Path, rows: int) -> bytes:
    con = sqlite3.connect(str(path))
    con.execute("PRAGMA secure_delete=off")
    con.execute("CREATE TABLE installed (id INTEGER PRIMARY KEY, addonID TEXT UNIQUE, enabled BOOLEAN, "
                "installDate TEXT, lastUpdated TEXT, lastUsed TEXT, origin TEXT NOT NULL DEFAULT '')")
    con.executemany("INSERT INTO installed VALUES (?,?,?,?,?,?,?)", [
        (i, f"plugin.video.bench{i:06d}", i % 2, "2019-03-04 10:11:12", "2019-05-06 07:08:09",
         None, "repository.xbmc.org") for i in range(1, rows + 1)])
    con.commit()
    gone = random.Random(1).sample(range(1, rows + 1), rows // 4)
    con.executemany("DELETE FROM installed WHERE id=?", [(g,) for g in gone])
    con.commit()
    con.close()
    return path.read_bytes()


def varint_buffer(n: int) -> bytes:
    rng = random.Random(2)
    out = bytearray()
    for _ in range(n):
        v = rng.choice([rng.randrange(128), rng.randrange(1 << 14), rng.randrange(1 << 35)])
        enc = [v & 0x7F]
        v >>= 7
        while v:
            enc.append((v & 0x7F) | 0x80)
            v >>= 7
        out += bytes(reversed(enc))
    return bytes(out)


def decode_all(mod, buf: bytes) -> int:
    pos, n, dv = 0, len(buf), mod.decode_varint
    count = 0
    while pos < n:
        _, w = dv(buf, pos)
        pos += w
        count += 1
    return count


def timed(fn, repeat: int) -> float:
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--varints", type=int, default=200000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as d:
        data = make_db(Path(d) / "bench.db", args.rows)
    buf = varint_buffer(args.varints)
    impls = kernels.available()
    print(f"database: {len(data)} bytes, {args.rows} rows, {args.rows // 4} deleted; "
          f"kernels available: {', '.join(impls)}")

    results = {}
    for name in impls:
        mod = kernels.load(name)
        results[name] = {
            "varint decode": timed(lambda: decode_all(mod, buf), args.repeat),
            "carve deleted": timed(lambda: list(carve_deleted(open_database(data), impl=mod)),
                                   args.repeat),
        }
    db = open_database(data)
    info = db.tables()["installed"]
    walk = timed(lambda: list(db.walk_table(info.root_page)), args.repeat)

    print(f"{'workload':<16}" + "".join(f"{n:>12}" for n in impls) +
          ("     speedup" if len(impls) > 1 else ""))
    for work in ("varint decode", "carve deleted"):
        row = f"{work:<16}" + "".join(f"{results[n][work] * 1000:>10.1f}ms" for n in impls)
        if len(impls) > 1:
            row += f"{results['python'][work] / results['compiled'][work]:>11.1f}x"
        print(row)
    print(f"{'table walk':<16}{walk * 1000:>10.1f}ms  ({kernels.IMPLEMENTATION} kernels)")


if __name__ == "__main__":
    main()
