"""Read-only parser for the SQLite 3 file format.

Works on raw bytes (or a ranged reader) without going through any SQLite
library, so it can read truncated or damaged evidence and see the parts of
the file that a query engine hides.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

from ..errors import BadMagic, BadPageKind, BadPageSize, OutOfBounds, TooShort
from . import kernels
from .schema import TableInfo, table_info

log = logging.getLogger(__name__)

MAGIC = b"SQLite format 3\x00"
HEADER_SIZE = 100


class TextEncoding(str, Enum):
    UTF8 = "UTF8"
    UTF16LE = "UTF16LE"
    UTF16BE = "UTF16BE"

    @property
    def codec(self) -> str:
        return {"UTF8": "utf-8", "UTF16LE": "utf-16-le", "UTF16BE": "utf-16-be"}[self.value]


class PageKind(str, Enum):
    TABLE_INTERIOR = "TableInterior"
    TABLE_LEAF = "TableLeaf"
    INDEX_INTERIOR = "IndexInterior"
    INDEX_LEAF = "IndexLeaf"
    OVERFLOW = "Overflow"
    FREELIST = "Freelist"
    UNKNOWN = "Unknown"


_FLAG_KINDS = {
    0x05: PageKind.TABLE_INTERIOR,
    0x0D: PageKind.TABLE_LEAF,
    0x02: PageKind.INDEX_INTERIOR,
    0x0A: PageKind.INDEX_LEAF,
}


class Liveness(str, Enum):
    LIVE = "Live"
    CARVED_FREEBLOCK = "CarvedFreeblock"
    CARVED_FREELIST = "CarvedFreelist"


class ValueKind(str, Enum):
    NULL = "Null"
    INTEGER = "Integer"
    FLOAT = "Float"
    TEXT = "Text"
    BLOB = "Blob"


@dataclass(frozen=True)
class CellValue:
    """One decoded column value. ``value`` holds the payload matching ``kind``."""

    kind: ValueKind
    value: object = None
    truncated: bool = False

    def to_dict(self) -> dict:
        v = self.value
        if self.kind is ValueKind.BLOB and v is not None:
            v = bytes(v).hex()
        d = {"kind": self.kind.value, "value": v}
        if self.truncated:
            d["truncated"] = True
        return d

    @property
    def python(self):
        return self.value


NULL_VALUE = CellValue(ValueKind.NULL)


@dataclass
class SqliteRecord:
    rowid: Optional[int]
    values: List[CellValue]
    page_number: int
    liveness: Liveness
    byte_offset: int
    table: Optional[str] = None

    @property
    def truncated(self) -> bool:
        return any(v.truncated for v in self.values)

    def to_dict(self) -> dict:
        return {
            "rowid": self.rowid,
            "page": self.page_number,
            "offset": self.byte_offset,
            "liveness": self.liveness.value,
            "table": self.table,
            "values": [v.to_dict() for v in self.values],
        }


@dataclass
class DbHeader:
    page_size: int
    page_count: int
    text_encoding: TextEncoding
    freelist_head: int
    freelist_count: int
    schema_cookie: int
    reserved_space: int = 0
    change_counter: int = 0
    version_valid_for: int = 0
    largest_root_page: int = 0
    user_version: int = 0
    sqlite_version: int = 0
    file_size: Optional[int] = None
    flags: List[str] = field(default_factory=list)

    @property
    def usable_size(self) -> int:
        return self.page_size - self.reserved_space

    @property
    def auto_vacuum(self) -> bool:
        return self.largest_root_page != 0

    def to_dict(self) -> dict:
        return {
            "page_size": self.page_size,
            "page_count": self.page_count,
            "text_encoding": self.text_encoding.value,
            "freelist_head": self.freelist_head,
            "freelist_count": self.freelist_count,
            "schema_cookie": self.schema_cookie,
            "flags": list(self.flags),
        }


@dataclass
class BtreePage:
    page_number: int
    kind: PageKind
    cell_count: int = 0
    cell_offsets: List[int] = field(default_factory=list)
    freeblocks: List[Tuple[int, int]] = field(default_factory=list)
    fragmented_bytes: int = 0
    content_start: int = 0
    right_most: Optional[int] = None
    header_offset: int = 0
    pointer_array_end: int = 0

    @property
    def freeblock_offsets(self) -> List[int]:
        return [off for off, _ in self.freeblocks]

    @property
    def is_interior(self) -> bool:
        return self.kind in (PageKind.TABLE_INTERIOR, PageKind.INDEX_INTERIOR)


@dataclass(frozen=True)
class Anomaly:
    page: Optional[int]
    kind: str
    detail: str

    def to_dict(self, db_path: str = "") -> dict:
        return {"db_path": db_path, "page": self.page, "kind": self.kind, "detail": self.detail}


@dataclass(frozen=True)
class SchemaObject:
    object_type: str
    name: str
    table_name: str
    root_page: int
    sql_text: Optional[str]


def _u16(buf, off: int) -> int:
    if off + 2 > len(buf):
        raise OutOfBounds(f"u16 at {off}")
    return (buf[off] << 8) | buf[off + 1]


def _u32(buf, off: int) -> int:
    if off + 4 > len(buf):
        raise OutOfBounds(f"u32 at {off}")
    return struct.unpack_from(">I", buf, off)[0]


def parse_header(data: bytes, file_size: Optional[int] = None) -> DbHeader:
    """Decode the 100-byte database header; all multi-byte fields are big-endian."""
    if len(data) < HEADER_SIZE:
        raise TooShort(f"need {HEADER_SIZE} header bytes, got {len(data)}")
    if bytes(data[:16]) != MAGIC:
        raise BadMagic("missing SQLite format 3 magic string")
    raw_size = _u16(data, 16)
    page_size = 65536 if raw_size == 1 else raw_size
    if page_size < 512 or page_size > 65536 or page_size & (page_size - 1):
        raise BadPageSize(f"invalid page size {raw_size}")
    (change_counter, in_header_pages, freelist_head, freelist_count, schema_cookie,
     _schema_format, _cache, largest_root, enc, user_version) = struct.unpack_from(">10I", data, 24)
    version_valid_for, sqlite_version = struct.unpack_from(">II", data, 92)
    flags = []
    encoding = {1: TextEncoding.UTF8, 2: TextEncoding.UTF16LE, 3: TextEncoding.UTF16BE}.get(enc)
    if encoding is None:
        if enc != 0:
            flags.append(f"unknown_text_encoding:{enc}")
        encoding = TextEncoding.UTF8
    if in_header_pages and change_counter == version_valid_for:
        page_count = in_header_pages
    elif file_size is not None:
        page_count = file_size // page_size
        flags.append("page_count_from_file_size")
    else:
        page_count = in_header_pages
    if file_size is not None:
        expected = page_count * page_size
        if expected > file_size:
            flags.append(f"truncated:{expected - file_size}_bytes_missing")
        elif expected < file_size:
            flags.append(f"trailing_bytes:{file_size - expected}")
    return DbHeader(
        page_size=page_size,
        page_count=page_count,
        text_encoding=encoding,
        freelist_head=freelist_head,
        freelist_count=freelist_count,
        schema_cookie=schema_cookie,
        reserved_space=data[20],
        change_counter=change_counter,
        version_valid_for=version_valid_for,
        largest_root_page=largest_root,
        user_version=user_version,
        sqlite_version=sqlite_version,
        file_size=file_size,
        flags=flags,
    )


def decode_varint(data, offset: int) -> Tuple[int, int]:
    return kernels.decode_varint(data, offset)


def decode_text(raw: bytes, encoding: TextEncoding) -> str:
    """Decode stored text; undecodable bytes survive as escapes, never replacement chars."""
    if encoding is TextEncoding.UTF8:
        return raw.decode("utf-8", "surrogateescape")
    try:
        return raw.decode(encoding.codec)
    except UnicodeDecodeError:
        return raw.decode(encoding.codec, "backslashreplace")


def decode_values(buf, offset: int, types, limit: int,
                  encoding: TextEncoding = TextEncoding.UTF8) -> List[CellValue]:
    """Decode record body values starting at *offset*; values cut off by *limit* are flagged."""
    out = []
    pos = offset
    for t in types:
        size = kernels.serial_size(t)
        avail = max(0, min(size, limit - pos))
        truncated = avail < size
        raw = bytes(buf[pos:pos + avail])
        pos += size
        if t == 0:
            out.append(NULL_VALUE)
        elif t == 8 or t == 9:
            out.append(CellValue(ValueKind.INTEGER, t - 8))
        elif t == 7:
            out.append(CellValue(ValueKind.FLOAT, None if truncated else struct.unpack(">d", raw)[0],
                                 truncated))
        elif 1 <= t <= 6:
            out.append(CellValue(ValueKind.INTEGER,
                                 None if truncated else int.from_bytes(raw, "big", signed=True),
                                 truncated))
        elif t >= 12 and t & 1:
            out.append(CellValue(ValueKind.TEXT, decode_text(raw, encoding), truncated))
        elif t >= 12:
            out.append(CellValue(ValueKind.BLOB, raw, truncated))
        else:
            raise OutOfBounds(f"reserved serial type {t}")
    return out


class _BytesReader:
    def __init__(self, data):
        self._data = bytes(data)
        self.size = len(self._data)

    def read_at(self, offset: int, length: int) -> bytes:
        return self._data[offset:offset + length]


class SqliteDatabase:
    """Immutable view over one database file's bytes."""

    def __init__(self, data, path: str = ""):
        if isinstance(data, (bytes, bytearray, memoryview)):
            self._reader = _BytesReader(data)
        else:
            self._reader = data
        self.path = path
        self.file_size = self._reader.size
        self.header = parse_header(self._reader.read_at(0, HEADER_SIZE), self.file_size)
        self.anomalies: List[Anomaly] = []
        self._pages: Dict[int, bytes] = {}
        self._schema: Optional[List[SchemaObject]] = None
        for flag in self.header.flags:
            if flag.startswith("truncated"):
                self._anomaly(None, "truncated_file", flag)

    # -- low level ---------------------------------------------------------

    def _anomaly(self, page, kind, detail):
        a = Anomaly(page, kind, detail)
        if a not in self.anomalies:
            self.anomalies.append(a)
            log.debug("%s page %s: %s %s", self.path, page, kind, detail)

    @property
    def page_size(self) -> int:
        return self.header.page_size

    @property
    def usable_size(self) -> int:
        return self.header.usable_size

    @property
    def page_count(self) -> int:
        return self.header.page_count

    @property
    def encoding(self) -> TextEncoding:
        return self.header.text_encoding

    def page_offset(self, page_number: int) -> int:
        return (page_number - 1) * self.page_size

    def page(self, page_number: int) -> bytes:
        """Raw bytes of a 1-based page; may be short when the file is truncated."""
        cached = self._pages.get(page_number)
        if cached is not None:
            return cached
        if page_number < 1 or page_number > max(self.page_count, 1):
            self._anomaly(page_number, "page_out_of_range", f"page count is {self.page_count}")
            return b""
        data = self._reader.read_at(self.page_offset(page_number), self.page_size)
        if len(data) < self.page_size:
            self._anomaly(page_number, "short_page", f"{len(data)} of {self.page_size} bytes present")
        self._pages[page_number] = data
        return data

    def btree_page(self, page_number: int) -> BtreePage:
        data = self.page(page_number)
        hoff = HEADER_SIZE if page_number == 1 else 0
        if len(data) < hoff + 8:
            return BtreePage(page_number, PageKind.UNKNOWN, header_offset=hoff)
        kind = _FLAG_KINDS.get(data[hoff], PageKind.UNKNOWN)
        if kind is PageKind.UNKNOWN:
            return BtreePage(page_number, kind, header_offset=hoff)
        page = BtreePage(page_number, kind, header_offset=hoff)
        first_fb = _u16(data, hoff + 1)
        page.cell_count = _u16(data, hoff + 3)
        page.content_start = _u16(data, hoff + 5) or 65536
        page.fragmented_bytes = data[hoff + 7]
        ptr = hoff + 8
        if page.is_interior:
            page.right_most = _u32(data, hoff + 8)
            ptr = hoff + 12
        page.pointer_array_end = ptr + 2 * page.cell_count
        usable = min(self.usable_size, len(data))
        if page.pointer_array_end > usable:
            self._anomaly(page_number, "cell_count_overflow", f"{page.cell_count} cells cannot fit")
            page.cell_count = max(0, (usable - ptr) // 2)
            page.pointer_array_end = ptr + 2 * page.cell_count
        for i in range(page.cell_count):
            off = _u16(data, ptr + 2 * i)
            if off < page.pointer_array_end or off >= usable:
                self._anomaly(page_number, "bad_cell_pointer", f"cell {i} at {off}")
                continue
            page.cell_offsets.append(off)
        seen = set()
        off = first_fb
        prev = 0
        while off:
            if off in seen or off <= prev or off + 4 > usable:
                self._anomaly(page_number, "bad_freeblock_chain", f"freeblock at {off}")
                break
            seen.add(off)
            size = _u16(data, off + 2)
            if size < 4 or off + size > usable:
                self._anomaly(page_number, "bad_freeblock_size", f"freeblock at {off} size {size}")
                break
            page.freeblocks.append((off, size))
            prev = off
            off = _u16(data, off)
        return page

    def _local_payload(self, payload_size: int, table: bool) -> int:
        u = self.usable_size
        x = u - 35 if table else ((u - 12) * 64 // 255) - 23
        if payload_size <= x:
            return payload_size
        m = ((u - 12) * 32 // 255) - 23
        k = m + ((payload_size - m) % (u - 4))
        return k if k <= x else m

    def _overflow(self, first: int, needed: int, visited_pages: Optional[set] = None) -> Tuple[bytes, List[int]]:
        chunks = []
        pages = []
        seen = set()
        page_no = first
        per_page = self.usable_size - 4
        while needed > 0 and page_no:
            if page_no in seen or page_no > self.page_count:
                self._anomaly(page_no, "bad_overflow_chain", f"overflow page {page_no} revisited or out of range")
                break
            seen.add(page_no)
            pages.append(page_no)
            data = self.page(page_no)
            if len(data) < 4:
                break
            take = min(needed, per_page)
            chunk = data[4:4 + take]
            chunks.append(chunk)
            needed -= len(chunk)
            if len(chunk) < take:
                break
            page_no = _u32(data, 0)
        if needed > 0:
            self._anomaly(first, "overflow_short", f"{needed} payload bytes missing")
        return b"".join(chunks), pages

    def _cell_payload(self, data: bytes, page_number: int, offset: int, kind: PageKind):
        """Return ``(rowid, payload, declared_size, payload_start, overflow_pages)``."""
        table_leaf = kind is PageKind.TABLE_LEAF
        pos = offset
        if kind is PageKind.INDEX_INTERIOR:
            pos += 4  # left child pointer
        plen, w = kernels.decode_varint(data, pos)
        pos += w
        rowid = None
        if table_leaf:
            rowid, w = kernels.decode_varint(data, pos)
            pos += w
        local = self._local_payload(plen, table_leaf)
        usable = min(self.usable_size, len(data))
        local_bytes = data[pos:min(pos + local, usable)]
        overflow_pages: List[int] = []
        payload = local_bytes
        if local < plen and pos + local + 4 <= usable:
            extra, overflow_pages = self._overflow(_u32(data, pos + local), plen - local)
            payload = local_bytes + extra
        if len(payload) < plen:
            self._anomaly(page_number, "payload_truncated", f"cell at {offset}: {len(payload)}/{plen} bytes")
        return rowid, payload, plen, pos, overflow_pages

    def _decode_payload(self, payload: bytes, declared: int) -> List[CellValue]:
        types, hsize = kernels.read_record_header(payload, 0, len(payload))
        return decode_values(payload, hsize, types, len(payload), self.encoding)

    # -- traversal ---------------------------------------------------------

    def walk_table(self, root_page: int, table: Optional[str] = None) -> Iterator[SqliteRecord]:
        """Yield every live row of the table B-tree rooted at *root_page*, in rowid order."""
        root = self.btree_page(root_page)
        if root.kind not in (PageKind.TABLE_LEAF, PageKind.TABLE_INTERIOR):
            raise BadPageKind(f"page {root_page} is {root.kind.value}, not a table b-tree page")
        visited = set()
        stack = [root_page]
        while stack:
            n = stack.pop()
            if n in visited:
                self._anomaly(n, "cycle_page", f"page {n} reached twice while walking root {root_page}")
                continue
            visited.add(n)
            page = root if n == root_page else self.btree_page(n)
            data = self.page(n)
            if page.kind is PageKind.TABLE_INTERIOR:
                children = []
                for off in page.cell_offsets:
                    try:
                        children.append(_u32(data, off))
                    except OutOfBounds:
                        self._anomaly(n, "bad_cell", f"interior cell at {off}")
                if page.right_most:
                    children.append(page.right_most)
                stack.extend(reversed(children))
            elif page.kind is PageKind.TABLE_LEAF:
                base = self.page_offset(n)
                for off in page.cell_offsets:
                    try:
                        rowid, payload, plen, start, _ = self._cell_payload(data, n, off, PageKind.TABLE_LEAF)
                        values = self._decode_payload(payload, plen)
                    except OutOfBounds as exc:
                        self._anomaly(n, "bad_cell", f"leaf cell at {off}: {exc}")
                        continue
                    yield SqliteRecord(rowid, values, n, Liveness.LIVE, base + start, table)
            else:
                self._anomaly(n, "bad_page_kind", f"{page.kind.value} page inside table tree {root_page}")

    def tree_pages(self, root_page: int) -> Tuple[Dict[int, PageKind], List[int]]:
        """All B-tree pages and overflow pages reachable from *root_page*."""
        pages: Dict[int, PageKind] = {}
        overflow: List[int] = []
        stack = [root_page]
        while stack:
            n = stack.pop()
            if n in pages or n < 1 or n > self.page_count:
                if n in pages:
                    self._anomaly(n, "cycle_page", f"page {n} reached twice under root {root_page}")
                continue
            page = self.btree_page(n)
            pages[n] = page.kind
            if page.kind is PageKind.UNKNOWN:
                continue
            data = self.page(n)
            if page.is_interior:
                for off in page.cell_offsets:
                    try:
                        stack.append(_u32(data, off))
                    except OutOfBounds:
                        pass
                if page.right_most:
                    stack.append(page.right_most)
            if page.kind is PageKind.TABLE_INTERIOR:
                continue
            for off in page.cell_offsets:
                try:
                    _, _, _, _, ovf = self._cell_payload(data, n, off, page.kind)
                    overflow.extend(ovf)
                except OutOfBounds:
                    continue
        return pages, overflow

    def freelist(self) -> Tuple[List[int], List[int]]:
        """Return ``(trunk_pages, leaf_pages)`` of the freelist."""
        trunks: List[int] = []
        leaves: List[int] = []
        seen = set()
        n = self.header.freelist_head
        while n:
            if n in seen or n > self.page_count:
                self._anomaly(n, "bad_freelist_chain", f"trunk {n} revisited or out of range")
                break
            seen.add(n)
            trunks.append(n)
            data = self.page(n)
            if len(data) < 8:
                break
            count = _u32(data, 4)
            max_entries = (self.usable_size - 8) // 4
            if count > max_entries:
                self._anomaly(n, "bad_freelist_trunk", f"{count} leaf entries")
                count = max_entries
            for i in range(count):
                leaf = _u32(data, 8 + 4 * i)
                if 1 <= leaf <= self.page_count:
                    leaves.append(leaf)
                else:
                    self._anomaly(n, "bad_freelist_leaf", f"leaf page {leaf}")
            n = _u32(data, 0)
        total = len(trunks) + len(leaves)
        if total != self.header.freelist_count:
            self._anomaly(None, "freelist_count_mismatch",
                          f"header says {self.header.freelist_count}, chain holds {total}")
        return trunks, leaves

    def ptrmap_pages(self) -> List[int]:
        if not self.header.auto_vacuum:
            return []
        step = self.usable_size // 5 + 1
        return list(range(2, self.page_count + 1, step))

    # -- schema ------------------------------------------------------------

    def read_schema(self) -> List[SchemaObject]:
        if self._schema is None:
            objects = []
            for rec in self.walk_table(1, "sqlite_master"):
                vals = [v.value for v in rec.values] + [None] * 5
                objects.append(SchemaObject(
                    str(vals[0]), str(vals[1]), str(vals[2]),
                    vals[3] if isinstance(vals[3], int) else 0, vals[4]))
            self._schema = objects
        return list(self._schema)

    def tables(self) -> Dict[str, TableInfo]:
        out = {}
        for obj in self.read_schema():
            if obj.object_type == "table":
                out[obj.name] = table_info(obj.name, obj.root_page, obj.sql_text)
        return out

    def find_table(self, *candidates: str) -> Optional[TableInfo]:
        tables = {name.lower(): info for name, info in self.tables().items()}
        for cand in candidates:
            info = tables.get(cand.lower())
            if info is not None:
                return info
        return None

    def page_map(self) -> Dict[int, str]:
        """Classify every page in ``[1, page_count]`` exactly once."""
        labels: Dict[int, str] = {}

        def claim(page_no: int, label: str):
            if 1 <= page_no <= self.page_count and page_no not in labels:
                labels[page_no] = label
            elif page_no in labels and labels[page_no] != label:
                self._anomaly(page_no, "page_claimed_twice", f"{labels[page_no]} vs {label}")

        for p in self.ptrmap_pages():
            claim(p, "ptrmap")
        roots = [(1, "schema")]
        try:
            for obj in self.read_schema():
                if obj.root_page > 0:
                    roots.append((obj.root_page, "table" if obj.object_type == "table" else "index"))
        except BadPageKind as exc:
            self._anomaly(1, "bad_schema_page", str(exc))
        for root, label in roots:
            pages, overflow = self.tree_pages(root)
            for p, kind in pages.items():
                if label != "schema" and kind in (PageKind.INDEX_LEAF, PageKind.INDEX_INTERIOR):
                    claim(p, "index")
                else:
                    claim(p, label)
            for p in overflow:
                claim(p, "overflow")
        trunks, leaves = self.freelist()
        for p in trunks + leaves:
            claim(p, "freelist")
        for p in range(1, self.page_count + 1):
            if p not in labels:
                labels[p] = "unclassified"
                self._anomaly(p, "unclassified_page", "not reachable from schema or freelist")
        return dict(sorted(labels.items()))

    # -- named rows --------------------------------------------------------

    def named_rows(self, info: TableInfo, records) -> List[Tuple[SqliteRecord, Dict[str, CellValue]]]:
        """Pair each record's values with column names; the rowid alias gets the rowid."""
        out = []
        stored = info.stored_columns
        alias = info.columns[info.rowid_alias] if info.rowid_alias is not None else None
        for rec in records:
            row: Dict[str, CellValue] = {}
            for i, col in enumerate(stored):
                v = rec.values[i] if i < len(rec.values) else NULL_VALUE
                if col is alias:
                    v = CellValue(ValueKind.INTEGER, rec.rowid) if rec.rowid is not None else NULL_VALUE
                elif v.kind is ValueKind.INTEGER and v.value is not None and col.affinity == "REAL":
                    # whole-number reals are stored as integers and widened on read
                    v = CellValue(ValueKind.FLOAT, float(v.value))
                row[col.name] = v
            for j in range(len(stored), len(rec.values)):
                row[f"_extra{j}"] = rec.values[j]
            out.append((rec, row))
        return out

    def table_rows(self, info: TableInfo) -> List[Tuple[SqliteRecord, Dict[str, CellValue]]]:
        return self.named_rows(info, self.walk_table(info.root_page, info.name))

    def carve_deleted(self, **options) -> Iterator[SqliteRecord]:
        from .carve import carve_deleted
        return carve_deleted(self, **options)


def open_database(data, path: str = "") -> SqliteDatabase:
    return SqliteDatabase(data, path)


def walk_table(db: SqliteDatabase, root_page: int) -> Iterator[SqliteRecord]:
    return db.walk_table(root_page)


def read_schema(db: SqliteDatabase) -> List[SchemaObject]:
    return db.read_schema()
