"""Column layout recovery from ``CREATE TABLE`` statements.

Only as much SQL as is needed to name the stored columns, find the rowid
alias and derive each column's type affinity.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from . import kernels as k

_TOKEN_RE = re.compile(
    r"""\s+|--[^\n]*|/\*.*?\*/
    |(?P<q>"(?:[^"]|"")*"|`(?:[^`]|``)*`|\[[^\]]*\]|'(?:[^']|'')*')
    |(?P<w>[A-Za-z_\x80-￿][\w$\x80-￿]*)
    |(?P<n>[-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)
    |(?P<p>.)""",
    re.S | re.X,
)

_COLUMN_CONSTRAINT_WORDS = {
    "CONSTRAINT", "PRIMARY", "NOT", "NULL", "UNIQUE", "CHECK", "DEFAULT",
    "COLLATE", "REFERENCES", "GENERATED", "AS",
}
_TABLE_CONSTRAINT_WORDS = {"CONSTRAINT", "PRIMARY", "UNIQUE", "CHECK", "FOREIGN"}


@dataclass
class Column:
    name: str
    decl_type: str = ""
    not_null: bool = False
    primary_key: bool = False
    pk_desc: bool = False
    virtual: bool = False

    @property
    def affinity(self) -> str:
        t = self.decl_type.upper()
        if "INT" in t:
            return "INTEGER"
        if "CHAR" in t or "CLOB" in t or "TEXT" in t:
            return "TEXT"
        if "BLOB" in t or not t:
            return "BLOB"
        if "REAL" in t or "FLOA" in t or "DOUB" in t:
            return "REAL"
        return "NUMERIC"


@dataclass
class TableInfo:
    name: str
    root_page: int
    sql: Optional[str]
    columns: List[Column] = field(default_factory=list)
    rowid_alias: Optional[int] = None
    without_rowid: bool = False

    @property
    def stored_columns(self) -> List[Column]:
        return [c for c in self.columns if not c.virtual]

    def type_masks(self) -> Tuple[int, ...]:
        """Per stored column, the serial-type classes a plausible record may hold."""
        masks = []
        for i, col in enumerate(self.stored_columns):
            if self.rowid_alias is not None and self.columns[self.rowid_alias] is col:
                masks.append(k.NULL)
                continue
            aff = col.affinity
            if aff in ("INTEGER", "REAL"):
                m = k.NULL | k.INT | k.REAL
            elif aff == "TEXT":
                m = k.NULL | k.TEXT
            elif aff == "NUMERIC":
                m = k.NULL | k.INT | k.REAL | k.TEXT
            else:
                m = k.ANY
            if col.not_null:
                m &= ~k.NULL
            masks.append(m)
        return tuple(masks)

    def lead_type(self) -> int:
        """Serial type of the first stored column when it is fixed (rowid alias), else -1."""
        stored = self.stored_columns
        if stored and self.rowid_alias is not None and self.columns[self.rowid_alias] is stored[0]:
            return 0
        return -1


def _tokens(sql: str):
    out = []
    for m in _TOKEN_RE.finditer(sql):
        if m.group("q") is not None:
            out.append(("id", _unquote(m.group("q"))))
        elif m.group("w") is not None:
            out.append(("w", m.group("w")))
        elif m.group("n") is not None:
            out.append(("n", m.group("n")))
        elif m.group("p") is not None:
            out.append(("p", m.group("p")))
    return out


def _unquote(text: str) -> str:
    q = text[0]
    if q == "[":
        return text[1:-1]
    return text[1:-1].replace(q * 2, q)


def _split_top_level(tokens):
    parts, cur, depth = [], [], 0
    for tok in tokens:
        if tok == ("p", "("):
            depth += 1
        elif tok == ("p", ")"):
            depth -= 1
        if tok == ("p", ",") and depth == 0:
            parts.append(cur)
            cur = []
        else:
            cur.append(tok)
    if cur:
        parts.append(cur)
    return parts


def _word(tok) -> str:
    return tok[1].upper() if tok[0] == "w" else ""


def parse_create_table(sql: str) -> Tuple[List[Column], Optional[int], bool]:
    """Return ``(columns, rowid_alias_index, without_rowid)`` for a CREATE TABLE."""
    tokens = _tokens(sql or "")
    try:
        open_at = tokens.index(("p", "("))
    except ValueError:
        return [], None, False
    depth = 0
    close_at = len(tokens)
    for i in range(open_at, len(tokens)):
        if tokens[i] == ("p", "("):
            depth += 1
        elif tokens[i] == ("p", ")"):
            depth -= 1
            if depth == 0:
                close_at = i
                break
    tail = [_word(t) for t in tokens[close_at + 1:]]
    without_rowid = any(tail[i:i + 2] == ["WITHOUT", "ROWID"] for i in range(len(tail)))

    columns: List[Column] = []
    table_pk: List[str] = []
    for part in _split_top_level(tokens[open_at + 1:close_at]):
        if not part:
            continue
        if _word(part[0]) in _TABLE_CONSTRAINT_WORDS:
            words = [_word(t) for t in part]
            if "PRIMARY" in words:
                i = part.index(("p", "("))
                inner = _split_top_level(part[i + 1:-1] if part[-1] == ("p", ")") else part[i + 1:])
                table_pk = [p[0][1] for p in inner if p]
            continue
        col = Column(part[0][1])
        rest = part[1:]
        type_words = []
        j = 0
        depth = 0
        while j < len(rest):
            tok = rest[j]
            if depth == 0 and _word(tok) in _COLUMN_CONSTRAINT_WORDS:
                break
            if tok == ("p", "("):
                depth += 1
            elif tok == ("p", ")"):
                depth -= 1
            type_words.append(tok[1])
            j += 1
        col.decl_type = _join_type(type_words)
        words = [_word(t) for t in rest[j:]]
        for i, w in enumerate(words):
            if w == "PRIMARY" and i + 1 < len(words) and words[i + 1] == "KEY":
                col.primary_key = True
                col.pk_desc = i + 2 < len(words) and words[i + 2] == "DESC"
            elif w == "NOT" and i + 1 < len(words) and words[i + 1] == "NULL":
                col.not_null = True
            elif w == "AS" and "STORED" not in words:
                col.virtual = True
        columns.append(col)

    if len(table_pk) == 1:
        for col in columns:
            if col.name.lower() == table_pk[0].lower():
                col.primary_key = True
    alias = None
    if not without_rowid:
        pks = [i for i, c in enumerate(columns) if c.primary_key]
        if len(pks) == 1:
            col = columns[pks[0]]
            if col.decl_type.upper() == "INTEGER" and not col.pk_desc:
                alias = pks[0]
    return columns, alias, without_rowid


def _join_type(words) -> str:
    text = " ".join(words)
    return text.replace(" (", "(").replace("( ", "(").replace(" )", ")").replace(" ,", ",")


def table_info(name: str, root_page: int, sql: Optional[str]) -> TableInfo:
    columns, alias, without_rowid = parse_create_table(sql or "")
    return TableInfo(name, root_page, sql, columns, alias, without_rowid)


SQLITE_MASTER = TableInfo(
    "sqlite_master", 1,
    "CREATE TABLE sqlite_master(type text, name text, tbl_name text, rootpage integer, sql text)",
    [Column("type", "text", not_null=True), Column("name", "text", not_null=True),
     Column("tbl_name", "text", not_null=True), Column("rootpage", "integer", not_null=True),
     Column("sql", "text")],
)
