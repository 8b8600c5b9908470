"""Pure-Python byte kernels: varints, record headers and carving scans.

``_kernels_c.pyx`` mirrors every function here with identical semantics; the
test-suite runs both against the same inputs.
"""
from ..errors import OutOfBounds

# serial-type classes, combined into per-column masks
NULL = 1
INT = 2
REAL = 4
TEXT = 8
BLOB = 16
ANY = NULL | INT | REAL | TEXT | BLOB

_FIXED_SIZES = (0, 1, 2, 3, 4, 6, 8, 8, 0, 0)


def decode_varint(buf, offset):
    n = len(buf)
    if offset < 0 or offset >= n:
        raise OutOfBounds(f"varint offset {offset} outside buffer of {n} bytes")
    value = 0
    for i in range(8):
        if offset + i >= n:
            raise OutOfBounds(f"varint at {offset} runs past end of buffer")
        b = buf[offset + i]
        value = (value << 7) | (b & 0x7F)
        if b < 0x80:
            return value, i + 1
    if offset + 8 >= n:
        raise OutOfBounds(f"varint at {offset} runs past end of buffer")
    value = (value << 8) | buf[offset + 8]
    if value >= 1 << 63:
        value -= 1 << 64
    return value, 9


def serial_size(t):
    """Body bytes used by serial type *t*, or -1 for the reserved types 10/11."""
    if t < 0:
        return -1
    if t < 10:
        return _FIXED_SIZES[t]
    if t < 12:
        return -1
    return (t - 12) >> 1


def serial_class(t):
    if t == 0:
        return NULL
    if t == 7:
        return REAL
    if 1 <= t <= 9:
        return INT
    if t >= 12:
        return TEXT if t & 1 else BLOB
    return 0


def read_record_header(buf, offset, limit):
    """Parse the record header at *offset*; returns ``(serial_types, header_len)``.

    Raises OutOfBounds when the header runs past *limit* or is malformed.
    """
    hsize, w = decode_varint(buf, offset)
    end = offset + hsize
    if hsize < w or end > limit:
        raise OutOfBounds(f"record header at {offset} claims {hsize} bytes")
    pos = offset + w
    types = []
    while pos < end:
        t, tw = decode_varint(buf, pos)
        pos += tw
        types.append(t)
    if pos != end:
        raise OutOfBounds(f"record header at {offset} overruns its declared size")
    return types, hsize


def _match_template(types, templates):
    n = len(types)
    for idx, masks in enumerate(templates):
        if len(masks) != n:
            continue
        for t, m in zip(types, masks):
            if not serial_class(t) & m:
                break
        else:
            return idx
    return -1


def scan_intact(buf, start, end, templates, min_cols, max_cols, max_payload, tail_ok):
    """Find every offset in ``[start, end)`` holding a fully intact record header.

    Returns tuples ``(offset, header_len, types, body_len, template_index)``.
    A candidate must have at least *min_cols* columns, not be all-NULL, fit a
    template when *templates* is non-empty, and have its body inside the region
    unless *tail_ok* allows a truncated final record.
    """
    out = []
    end = min(end, len(buf))
    max_header = 1 + 9 * max_cols
    for o in range(start, end):
        b = buf[o]
        if b < 2:
            continue
        try:
            hsize, w = decode_varint(buf, o)
        except OutOfBounds:
            continue
        if hsize < 2 or hsize > max_header or o + hsize > end:
            continue
        pos = o + w
        hend = o + hsize
        types = []
        body = 0
        ok = True
        nonnull = False
        while pos < hend:
            try:
                t, tw = decode_varint(buf, pos)
            except OutOfBounds:
                ok = False
                break
            pos += tw
            size = serial_size(t)
            if size < 0 or len(types) >= max_cols:
                ok = False
                break
            types.append(t)
            body += size
            if t != 0:
                nonnull = True
        if not ok or pos != hend or len(types) < min_cols or not nonnull:
            continue
        if body > max_payload:
            continue
        if hend + body > end and not tail_ok:
            continue
        tidx = -1
        if templates:
            tidx = _match_template(types, templates)
            if tidx < 0:
                continue
        out.append((o, hsize, tuple(types), body, tidx))
    return out


def scan_clobbered(buf, start, end, templates, leads, max_payload):
    """Find deleted cells whose first four bytes were overwritten on free.

    A freed cell starts with a freeblock header (next pointer, size) written
    over its payload-length varint, rowid varint and the start of the record
    header. Two layouts leave the remaining serial types recoverable:

    * layout 0: 1-byte length and rowid; header-size byte and the first
      serial type are lost, so the first type must be known (``leads``).
    * layout 1: three prefix bytes in total; only the header-size byte is lost.

    Returns tuples ``(cell_start, header_offset, header_len, types, body_len,
    template_index, layout)``.
    """
    out = []
    if not templates:
        return out
    end = min(end, len(buf))
    widest = max(len(m) for m in templates)
    zeros = bytes(widest)
    for c in range(start, end - 4):
        p = c + 4
        # every serial type would parse as NULL: no template can match here
        if buf[p] == 0 and bytes(buf[p:min(p + widest, end)]) == zeros[:min(widest, end - p)]:
            continue
        for tidx, masks in enumerate(templates):
            n = len(masks)
            lead = leads[tidx]
            for layout in (0, 1):
                if layout == 0:
                    if lead < 0 or not serial_class(lead) & masks[0]:
                        continue
                    types = [lead]
                    h = c + 2
                else:
                    types = []
                    h = c + 3
                pos = p
                body = serial_size(types[0]) if types else 0
                nonnull = False
                ok = True
                while len(types) < n:
                    if pos >= end:
                        ok = False
                        break
                    try:
                        t, tw = decode_varint(buf, pos)
                    except OutOfBounds:
                        ok = False
                        break
                    size = serial_size(t)
                    if size < 0 or not serial_class(t) & masks[len(types)]:
                        ok = False
                        break
                    pos += tw
                    types.append(t)
                    body += size
                    if t != 0:
                        nonnull = True
                if not ok or not nonnull:
                    continue
                hsize = pos - h
                if hsize >= 128 or body > max_payload or pos + body > end:
                    continue
                out.append((c, h, hsize, tuple(types), body, tidx, layout))
    return out
