# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_kernels_py``; semantics must stay identical."""
from libc.stdlib cimport malloc, free
from libc.stdint cimport int64_t, uint64_t

from ..errors import OutOfBounds

# class bits match _kernels_py: NULL=1 INT=2 REAL=4 TEXT=8 BLOB=16

cdef inline int _varint(const unsigned char[:] buf, Py_ssize_t n, Py_ssize_t offset,
                        int64_t* value) nogil:
    """Decode at *offset*; returns width, or 0 when the varint runs past *n*."""
    cdef uint64_t v = 0
    cdef int i
    cdef unsigned char b
    for i in range(8):
        if offset + i >= n:
            return 0
        b = buf[offset + i]
        v = (v << 7) | (b & 0x7F)
        if b < 0x80:
            value[0] = <int64_t>v
            return i + 1
    if offset + 8 >= n:
        return 0
    v = (v << 8) | buf[offset + 8]
    value[0] = <int64_t>v
    return 9


cdef inline int64_t _serial_size(int64_t t) nogil:
    if t < 0:
        return -1
    if t < 10:
        if t <= 4:
            return t
        if t == 5:
            return 6
        if t == 6 or t == 7:
            return 8
        return 0
    if t < 12:
        return -1
    return (t - 12) >> 1


cdef inline int _serial_class(int64_t t) nogil:
    if t == 0:
        return 1
    if t == 7:
        return 4
    if 1 <= t <= 9:
        return 2
    if t >= 12:
        return 8 if t & 1 else 16
    return 0


def decode_varint(buf, Py_ssize_t offset):
    cdef const unsigned char[:] view = buf
    cdef Py_ssize_t n = view.shape[0]
    cdef int64_t value = 0
    cdef int width
    if offset < 0 or offset >= n:
        raise OutOfBounds(f"varint offset {offset} outside buffer of {n} bytes")
    width = _varint(view, n, offset, &value)
    if width == 0:
        raise OutOfBounds(f"varint at {offset} runs past end of buffer")
    return value, width


def serial_size(t):
    return _serial_size(t)


def serial_class(t):
    return _serial_class(t)


def read_record_header(buf, Py_ssize_t offset, Py_ssize_t limit):
    cdef const unsigned char[:] view = buf
    cdef Py_ssize_t n = view.shape[0]
    cdef int64_t hsize = 0, t = 0
    cdef int w, tw
    cdef Py_ssize_t pos, end
    if offset < 0 or offset >= n:
        raise OutOfBounds(f"varint offset {offset} outside buffer of {n} bytes")
    w = _varint(view, n, offset, &hsize)
    if w == 0:
        raise OutOfBounds(f"varint at {offset} runs past end of buffer")
    end = offset + hsize
    if hsize < w or end > limit:
        raise OutOfBounds(f"record header at {offset} claims {hsize} bytes")
    pos = offset + w
    types = []
    while pos < end:
        if pos >= n:
            raise OutOfBounds(f"varint offset {pos} outside buffer of {n} bytes")
        tw = _varint(view, n, pos, &t)
        if tw == 0:
            raise OutOfBounds(f"varint at {pos} runs past end of buffer")
        pos += tw
        types.append(t)
    if pos != end:
        raise OutOfBounds(f"record header at {offset} overruns its declared size")
    return types, hsize


cdef class _Templates:
    cdef int count
    cdef int* lengths
    cdef int* offsets
    cdef int* masks
    cdef int widest

    def __cinit__(self, templates):
        cdef int i, j, total = 0
        self.count = len(templates)
        self.widest = 0
        self.lengths = <int*>malloc(max(self.count, 1) * sizeof(int))
        self.offsets = <int*>malloc(max(self.count, 1) * sizeof(int))
        for masks in templates:
            total += len(masks)
        self.masks = <int*>malloc(max(total, 1) * sizeof(int))
        total = 0
        for i in range(self.count):
            m = templates[i]
            self.lengths[i] = len(m)
            self.offsets[i] = total
            if len(m) > self.widest:
                self.widest = len(m)
            for j in range(len(m)):
                self.masks[total + j] = m[j]
            total += len(m)

    def __dealloc__(self):
        free(self.lengths)
        free(self.offsets)
        free(self.masks)


def scan_intact(buf, Py_ssize_t start, Py_ssize_t end, templates, int min_cols,
                int max_cols, int64_t max_payload, bint tail_ok):
    cdef const unsigned char[:] view = buf
    cdef Py_ssize_t n = view.shape[0]
    cdef _Templates tpl = _Templates(templates)
    cdef int64_t* types = <int64_t*>malloc(max(max_cols, 1) * sizeof(int64_t))
    cdef Py_ssize_t o, pos, hend
    cdef int64_t hsize = 0, t = 0, size, body
    cdef int64_t max_header = 1 + 9 * <int64_t>max_cols
    cdef int w, tw, ntypes, i, k, tidx
    cdef bint ok, nonnull
    out = []
    if end > n:
        end = n
    try:
        for o in range(start, end):
            if view[o] < 2:
                continue
            w = _varint(view, n, o, &hsize)
            if w == 0:
                continue
            if hsize < 2 or hsize > max_header or o + hsize > end:
                continue
            pos = o + w
            hend = o + hsize
            ntypes = 0
            body = 0
            ok = True
            nonnull = False
            while pos < hend:
                tw = _varint(view, n, pos, &t)
                if tw == 0:
                    ok = False
                    break
                pos += tw
                size = _serial_size(t)
                if size < 0 or ntypes >= max_cols:
                    ok = False
                    break
                types[ntypes] = t
                ntypes += 1
                body += size
                if t != 0:
                    nonnull = True
            if not ok or pos != hend or ntypes < min_cols or not nonnull:
                continue
            if body > max_payload:
                continue
            if hend + body > end and not tail_ok:
                continue
            tidx = -1
            if tpl.count:
                for i in range(tpl.count):
                    if tpl.lengths[i] != ntypes:
                        continue
                    for k in range(ntypes):
                        if not (_serial_class(types[k]) & tpl.masks[tpl.offsets[i] + k]):
                            break
                    else:
                        tidx = i
                        break
                if tidx < 0:
                    continue
            out.append((o, hsize, tuple([types[k] for k in range(ntypes)]), body, tidx))
    finally:
        free(types)
    return out


def scan_clobbered(buf, Py_ssize_t start, Py_ssize_t end, templates, leads,
                   int64_t max_payload):
    cdef const unsigned char[:] view = buf
    cdef Py_ssize_t n = view.shape[0]
    cdef _Templates tpl
    cdef int64_t* types
    cdef int* lead_arr
    cdef Py_ssize_t c, p, pos, h, q, stop
    cdef int64_t t = 0, size, body, hsize
    cdef int tidx, layout, ncols, ntypes, tw, base
    cdef bint ok, nonnull, allzero
    out = []
    if not templates:
        return out
    if end > n:
        end = n
    tpl = _Templates(templates)
    types = <int64_t*>malloc(tpl.widest * sizeof(int64_t))
    lead_arr = <int*>malloc(tpl.count * sizeof(int))
    for tidx in range(tpl.count):
        lead_arr[tidx] = leads[tidx]
    try:
        for c in range(start, end - 4):
            p = c + 4
            if view[p] == 0:
                allzero = True
                stop = p + tpl.widest
                if stop > end:
                    stop = end
                for q in range(p, stop):
                    if view[q] != 0:
                        allzero = False
                        break
                if allzero:
                    continue
            for tidx in range(tpl.count):
                ncols = tpl.lengths[tidx]
                base = tpl.offsets[tidx]
                for layout in range(2):
                    if layout == 0:
                        if lead_arr[tidx] < 0 or not (_serial_class(lead_arr[tidx]) & tpl.masks[base]):
                            continue
                        types[0] = lead_arr[tidx]
                        ntypes = 1
                        h = c + 2
                        body = _serial_size(lead_arr[tidx])
                    else:
                        ntypes = 0
                        h = c + 3
                        body = 0
                    pos = p
                    nonnull = False
                    ok = True
                    while ntypes < ncols:
                        if pos >= end:
                            ok = False
                            break
                        tw = _varint(view, n, pos, &t)
                        if tw == 0:
                            ok = False
                            break
                        size = _serial_size(t)
                        if size < 0 or not (_serial_class(t) & tpl.masks[base + ntypes]):
                            ok = False
                            break
                        pos += tw
                        types[ntypes] = t
                        ntypes += 1
                        body += size
                        if t != 0:
                            nonnull = True
                    if not ok or not nonnull:
                        continue
                    hsize = pos - h
                    if hsize >= 128 or body > max_payload or pos + body > end:
                        continue
                    out.append((c, h, hsize, tuple([types[q] for q in range(ntypes)]),
                                body, tidx, layout))
    finally:
        free(types)
        free(lead_arr)
    return out
