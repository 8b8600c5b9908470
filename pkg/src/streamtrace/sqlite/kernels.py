"""Kernel selection.

The compiled kernels are used when the extension was built; otherwise the
pure-Python implementation is loaded. Setting ``STREAMTRACE_PURE_PYTHON=1``
forces the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("STREAMTRACE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels_c as _impl
    except ImportError:
        _impl = _kernels_py

IMPLEMENTATION = "compiled" if _impl is not _kernels_py else "python"

NULL = _kernels_py.NULL
INT = _kernels_py.INT
REAL = _kernels_py.REAL
TEXT = _kernels_py.TEXT
BLOB = _kernels_py.BLOB
ANY = _kernels_py.ANY

decode_varint = _impl.decode_varint
serial_size = _impl.serial_size
serial_class = _impl.serial_class
read_record_header = _impl.read_record_header
scan_intact = _impl.scan_intact
scan_clobbered = _impl.scan_clobbered


def available():
    """Names of the kernel implementations importable in this environment."""
    names = ["python"]
    try:
        from . import _kernels_c  # noqa: F401
    except ImportError:
        pass
    else:
        names.append("compiled")
    return names


def load(name):
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels_c
        return _kernels_c
    raise ValueError(f"unknown kernel implementation: {name}")
