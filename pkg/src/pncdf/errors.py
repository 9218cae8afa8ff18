"""Exception hierarchy.

Every error carries a ``code`` attribute holding the classic netCDF status
value, so callers porting status-code based code can keep using numbers.
"""


class NCError(Exception):
    code = -1  # NC_EINVAL-style generic failure


# --- format ---------------------------------------------------------------

class InvalidSchema(NCError):
    code = -36


class HeaderOverflow(NCError):
    code = -64


class DecodeError(NCError):
    """Header parse failure; ``offset`` is the byte position where it failed."""

    code = -51

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class BadMagic(DecodeError):
    pass


class TruncatedHeader(DecodeError):
    pass


class UnsupportedVersion(DecodeError):
    pass


class MalformedName(DecodeError):
    code = -59


class InconsistentOffsets(DecodeError):
    pass


class OffsetOverflow(NCError):
    code = -62


class RelocationOverflow(OffsetOverflow):
    pass


# --- values ---------------------------------------------------------------

class RangeError(NCError):
    code = -60


class TypeMismatch(NCError):
    code = -56


# --- access ---------------------------------------------------------------

class OutOfBounds(NCError):
    code = -40


class RankMismatch(NCError):
    code = -36


class OverlapError(NCError):
    code = -36


class LayoutMismatch(NCError):
    code = -36


# --- collective / dataset ------------------------------------------------

class CollectiveMismatch(NCError):
    code = -250


class GroupAborted(CollectiveMismatch):
    """Raised on ranks stranded in a collective after another rank failed."""


class IoError(NCError):
    code = -68


class FileError(NCError):
    code = -31


class NotInDefineMode(NCError):
    code = -38


class NotInDataMode(NCError):
    code = -39


class DuplicateName(NCError):
    code = -42


class BadDimension(NCError):
    code = -46


class BadId(NCError):
    code = -49


class DatasetClosed(NCError):
    code = -33
