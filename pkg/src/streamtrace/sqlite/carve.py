"""Recovery of deleted records from free space inside a database file.

Three kinds of space are searched:

* freeblocks and the unallocated gap of live table-leaf pages
  (``CarvedFreeblock``);
* freelist trunk pages past their page-number array, and whole freelist leaf
  pages (``CarvedFreelist``).

Candidates come from two scans: one for records whose header survived
intact, and one for cells whose first four bytes were overwritten by a
freeblock header when they were freed. Candidates are checked against the
column layout of the tables in the schema, and the best non-overlapping set
per region is chosen by weighted interval scheduling.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from ..errors import BadPageKind, OutOfBounds, SqliteFormatError
from . import kernels
from .format import (
    CellValue,
    Liveness,
    PageKind,
    SqliteDatabase,
    SqliteRecord,
    TextEncoding,
    ValueKind,
    _u16,
    _u32,
    decode_values,
)
from .schema import SQLITE_MASTER, TableInfo

DEFAULT_MAX_PAYLOAD = 1_000_000
DEFAULT_MIN_COLUMNS = 2


@dataclass
class _Candidate:
    start: int
    end: int
    header_offset: int
    values: List[CellValue]
    table: Optional[str]
    rowid: Optional[int]
    weight: int


def _plausible(values: Sequence[CellValue]) -> bool:
    for v in values:
        if v.kind is ValueKind.BLOB and len(v.value) >= 8 and not v.value.strip(b"\x00"):
            return False
        if v.kind is ValueKind.TEXT and not v.truncated:
            for ch in v.value:
                o = ord(ch)
                if (o < 0x20 and ch not in "\t\n\r") or o == 0x7F or 0xDC80 <= o <= 0xDCFF:
                    return False
    return True


def _weight(data, start: int, end: int) -> int:
    # zero runs are cheap to "explain"; score the bytes that carry information
    span = bytes(data[start:end])
    return 2 * (len(span) - span.count(0)) + 1


def _best_tiling(cands: List[_Candidate]) -> List[_Candidate]:
    """Maximum-weight set of non-overlapping intervals (ties resolved deterministically)."""
    if not cands:
        return []
    cands = sorted(cands, key=lambda c: (c.end, c.start, -c.weight, c.header_offset))
    ends = [c.end for c in cands]
    best = [0] * (len(cands) + 1)
    take = [False] * len(cands)
    prev = [0] * len(cands)
    for j, c in enumerate(cands):
        p = bisect.bisect_right(ends, c.start, 0, j)
        prev[j] = p
        with_it = best[p] + c.weight
        if with_it > best[j]:
            best[j + 1] = with_it
            take[j] = True
        else:
            best[j + 1] = best[j]
    chosen = []
    j = len(cands) - 1
    while j >= 0:
        if take[j]:
            chosen.append(cands[j])
            j = prev[j] - 1
        else:
            j -= 1
    chosen.reverse()
    return chosen


class _Carver:
    def __init__(self, db: SqliteDatabase, max_payload: int, min_cols: int, impl):
        self.db = db
        self.k = impl or kernels
        self.max_payload = max_payload
        self.min_cols = min_cols
        try:
            tables = [t for t in db.tables().values()
                      if not t.without_rowid and len(t.stored_columns) >= min_cols]
        except (SqliteFormatError, OutOfBounds):
            tables = []
        self.user_tables = sorted(tables, key=lambda t: t.name)
        self.templates: List[TableInfo] = [SQLITE_MASTER] + self.user_tables
        self.masks = [t.type_masks() for t in self.templates]
        self.leads = [t.lead_type() for t in self.templates]
        self.max_cols = max(len(m) for m in self.masks)
        self.encoding: TextEncoding = db.encoding

    # -- candidate generation ---------------------------------------------

    def _recover_prefix(self, data, region_start: int, o: int, payload_len: int):
        """Look for an intact ``[payload length][rowid]`` prefix right before a header."""
        for w1 in (1, 2, 3):
            for w2 in range(1, 10):
                s = o - w1 - w2
                if s < region_start:
                    continue
                try:
                    plen, pw = self.k.decode_varint(data, s)
                    rowid, rw = self.k.decode_varint(data, s + pw)
                except OutOfBounds:
                    continue
                if pw == w1 and rw == w2 and plen == payload_len:
                    return s, rowid
        return None

    def _candidates(self, data, start: int, end: int) -> List[_Candidate]:
        out: List[_Candidate] = []
        if end - start < 4:
            return out
        usable = min(self.db.usable_size, len(data))
        tail_ok = end >= usable
        intact = self.k.scan_intact(data, start, end, self.masks, self.min_cols, self.max_cols,
                                    self.max_payload, tail_ok)
        for o, hsize, types, body, tidx in intact:
            body_off = o + hsize
            values = decode_values(data, body_off, types, end, self.encoding)
            if not _plausible(values):
                continue
            rec_end = min(body_off + body, end)
            s, rowid = o, None
            prefix = self._recover_prefix(data, start, o, hsize + body)
            if prefix is not None:
                s, rowid = prefix
            weight = _weight(data, s, rec_end) + 3 + (2 if rowid is not None else 0)
            out.append(_Candidate(s, rec_end, o, values, self.templates[tidx].name, rowid, weight))
        clobbered = self.k.scan_clobbered(data, start, end, self.masks, self.leads, self.max_payload)
        for c, h, hsize, types, body, tidx, _layout in clobbered:
            values = decode_values(data, h + hsize, types, end, self.encoding)
            if not _plausible(values):
                continue
            rec_end = h + hsize + body
            out.append(_Candidate(c, rec_end, h, values, self.templates[tidx].name, None,
                                  _weight(data, c, rec_end)))
        return out

    def _stale_leaf_cells(self, data) -> List[_Candidate]:
        """Cells still addressed by the old pointer array of a freed table-leaf page."""
        out: List[_Candidate] = []
        usable = min(self.db.usable_size, len(data))
        if len(data) < 8 or data[0] != 0x0D:
            return out
        count = _u16(data, 3)
        ptr_end = 8 + 2 * count
        if ptr_end > usable:
            return out
        for i in range(count):
            off = _u16(data, 8 + 2 * i)
            if off < ptr_end or off >= usable:
                continue
            try:
                plen, w1 = self.k.decode_varint(data, off)
                rowid, w2 = self.k.decode_varint(data, off + w1)
                h = off + w1 + w2
                types, hsize = self.k.read_record_header(data, h, usable)
            except OutOfBounds:
                continue
            tidx = self._template_for(types)
            if tidx < 0:
                continue
            local = self.db._local_payload(plen, True)
            limit = min(h + local, usable)
            values = decode_values(data, h + hsize, types, limit, self.encoding)
            if not _plausible(values):
                continue
            end = limit + (4 if local < plen else 0)
            out.append(_Candidate(off, min(end, usable), h, values, self.templates[tidx].name,
                                  rowid, _weight(data, off, end) + 8))
        return out

    def _template_for(self, types) -> int:
        for idx, masks in enumerate(self.masks):
            if len(masks) == len(types) and all(
                    self.k.serial_class(t) & m for t, m in zip(types, masks)):
                return idx
        return -1

    # -- regions -----------------------------------------------------------

    def regions(self) -> Iterator[Tuple[int, Liveness, List[Tuple[int, int]], bool]]:
        """Yield ``(page, liveness, [(start, end), ...], stale_leaf)`` per carvable page."""
        db = self.db
        page_map = db.page_map()
        trunks, leaves = db.freelist()
        trunk_set = set(trunks)
        for page_no, label in page_map.items():
            if label in ("table", "schema"):
                page = db.btree_page(page_no)
                if page.kind is not PageKind.TABLE_LEAF:
                    continue
                spans = []
                if page.content_start > page.pointer_array_end:
                    spans.append((page.pointer_array_end, min(page.content_start, db.usable_size)))
                spans.extend((off, off + size) for off, size in page.freeblocks)
                yield page_no, Liveness.CARVED_FREEBLOCK, spans, False
            elif label == "freelist":
                data = db.page(page_no)
                usable = min(db.usable_size, len(data))
                if page_no in trunk_set:
                    count = min(_u32(data, 4), (db.usable_size - 8) // 4) if len(data) >= 8 else 0
                    yield page_no, Liveness.CARVED_FREELIST, [(8 + 4 * count, usable)], False
                else:
                    yield page_no, Liveness.CARVED_FREELIST, [(0, usable)], True

    def run(self) -> Iterator[SqliteRecord]:
        db = self.db
        live_offsets, live_values = self._live_index()
        emitted = set()
        for page_no, liveness, spans, stale_leaf in self.regions():
            data = db.page(page_no)
            base = db.page_offset(page_no)
            chosen: List[_Candidate] = []
            if stale_leaf:
                cands = self._stale_leaf_cells(data)
                for s, e in spans:
                    cands.extend(self._candidates(data, max(s, 8), e))
                chosen.extend(_best_tiling(cands))
            else:
                for s, e in spans:
                    chosen.extend(_best_tiling(self._candidates(data, s, e)))
            for cand in chosen:
                offset = base + cand.header_offset
                key = (cand.table, tuple((v.kind, v.value) for v in cand.values))
                if (page_no, offset) in live_offsets or key in live_values:
                    continue
                # page splits leave several stale copies of one row; report it once
                if key in emitted:
                    continue
                emitted.add(key)
                yield SqliteRecord(cand.rowid, cand.values, page_no, liveness, offset, cand.table)

    def _live_index(self):
        offsets = set()
        values = set()
        for info in self.templates:
            try:
                for rec in self.db.walk_table(info.root_page, info.name):
                    offsets.add((rec.page_number, rec.byte_offset))
                    values.add((info.name, tuple((v.kind, v.value) for v in rec.values)))
            except (BadPageKind, SqliteFormatError):
                continue
        return offsets, values


def carve_deleted(db: SqliteDatabase, *, max_payload: int = DEFAULT_MAX_PAYLOAD,
                  min_cols: int = DEFAULT_MIN_COLUMNS, impl=None) -> Iterator[SqliteRecord]:
    """Yield best-effort records recovered from free space, flagged by liveness.

    *impl* selects a kernel module (see ``kernels.load``); by default the one
    chosen at import is used.
    """
    return _Carver(db, max_payload, min_cols, impl).run()


def carve_summary(records: Sequence[SqliteRecord]) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for rec in records:
        counts[rec.liveness.value] = counts.get(rec.liveness.value, 0) + 1
    return counts
