"""Exception hierarchy shared across the toolkit."""


class StreamtraceError(Exception):
    """Base class for every error raised by streamtrace."""


# evidence access

class PathEscapesRoot(StreamtraceError, ValueError):
    """A relative path resolved to a location outside the evidence root."""


class SymlinkRefused(StreamtraceError, OSError):
    """The requested path is a symbolic link; links are recorded, never followed."""


class FileTooLarge(StreamtraceError, OSError):
    """Whole-file read refused because the file exceeds the in-memory cap."""


# sqlite format

class SqliteFormatError(StreamtraceError):
    pass


class TooShort(SqliteFormatError):
    pass


class BadMagic(SqliteFormatError):
    pass


class BadPageSize(SqliteFormatError):
    pass


class OutOfBounds(SqliteFormatError, IndexError):
    pass


class BadPageKind(SqliteFormatError):
    pass


class CyclePage(SqliteFormatError):
    pass


# artifact extraction

class NoSuffixes(StreamtraceError, ValueError):
    pass


class NoRecognizedTables(StreamtraceError):
    pass


class DirNotFound(StreamtraceError, FileNotFoundError):
    pass


class UnsupportedFormat(StreamtraceError, ValueError):
    pass
