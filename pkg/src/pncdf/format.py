"""Classic (CDF-1) container: schema data model, header grammar, layout.

The header is a sequence of big-endian 32-bit words and 4-byte aligned
payloads::

    header   = magic numrecs dim_list gatt_list var_list
    dim_list = ABSENT | NC_DIMENSION nelems dim*
    var      = name nelems dimid* vatt_list nc_type vsize begin

Everything here is pure; functions return new objects rather than mutating
their inputs (``compute_layout`` copies the schema it is given).
"""
from __future__ import annotations

import copy
import enum
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    DecodeError,
    HeaderOverflow,
    InconsistentOffsets,
    InvalidSchema,
    MalformedName,
    OffsetOverflow,
    TruncatedHeader,
    UnsupportedVersion,
)

MAGIC = b"CDF"
VERSION_CLASSIC = 1

NC_DIMENSION = 10
NC_VARIABLE = 11
NC_ATTRIBUTE = 12

# CDF-1 stores offsets as signed 32-bit values.
MAX_OFFSET = 2**31 - 1
MAX_VSIZE = 2**32 - 4

NUMRECS_OFFSET = 4


class ExternalType(enum.IntEnum):
    """On-disk element type; the integer value is the nc_type code."""

    BYTE = 1
    CHAR = 2
    SHORT = 3
    INT = 4
    FLOAT = 5
    DOUBLE = 6

    @property
    def element_size(self) -> int:
        return _ELEMENT_SIZE[self]

    @property
    def dtype(self) -> np.dtype:
        """Big-endian numpy dtype of the external representation."""
        return _EXTERNAL_DTYPE[self]

    @property
    def cdl_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "ExternalType":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown external type {name!r}") from None


_ELEMENT_SIZE = {
    ExternalType.BYTE: 1,
    ExternalType.CHAR: 1,
    ExternalType.SHORT: 2,
    ExternalType.INT: 4,
    ExternalType.FLOAT: 4,
    ExternalType.DOUBLE: 8,
}

_EXTERNAL_DTYPE = {
    ExternalType.BYTE: np.dtype(">i1"),
    ExternalType.CHAR: np.dtype("S1"),
    ExternalType.SHORT: np.dtype(">i2"),
    ExternalType.INT: np.dtype(">i4"),
    ExternalType.FLOAT: np.dtype(">f4"),
    ExternalType.DOUBLE: np.dtype(">f8"),
}


def round4(n: int) -> int:
    return (n + 3) & ~3


@dataclass
class Dimension:
    name: str
    length: int
    is_unlimited: bool = False


@dataclass
class Attribute:
    """Named attribute. CHAR attributes hold ``bytes``; others a tuple."""

    name: str
    type: ExternalType
    values: bytes | tuple = ()

    def __post_init__(self):
        self.type = ExternalType(self.type)
        if self.type == ExternalType.CHAR:
            if isinstance(self.values, str):
                self.values = self.values.encode("utf-8")
            self.values = bytes(self.values)
        elif self.type in (ExternalType.FLOAT, ExternalType.DOUBLE):
            cast = np.float32 if self.type == ExternalType.FLOAT else np.float64
            self.values = tuple(float(cast(v)) for v in np.ravel(self.values))
        else:
            self.values = tuple(int(v) for v in np.ravel(self.values))

    def __len__(self):
        return len(self.values)


@dataclass
class Variable:
    name: str
    type: ExternalType
    dim_ids: tuple = ()
    attributes: list = field(default_factory=list)
    vsize: int = 0
    begin: int = 0
    var_id: int = -1

    def __post_init__(self):
        self.type = ExternalType(self.type)
        self.dim_ids = tuple(int(d) for d in self.dim_ids)


@dataclass
class Schema:
    dimensions: list = field(default_factory=list)
    global_attributes: list = field(default_factory=list)
    variables: list = field(default_factory=list)
    numrecs: int = 0
    data_begin: int = 0
    recsize: int = 0
    format_version: int = VERSION_CLASSIC

    @property
    def unlimited_dim_id(self) -> int | None:
        for i, d in enumerate(self.dimensions):
            if d.is_unlimited:
                return i
        return None

    def is_record(self, var: Variable) -> bool:
        return bool(var.dim_ids) and self.dimensions[var.dim_ids[0]].is_unlimited

    def record_variables(self) -> list:
        return [v for v in self.variables if self.is_record(v)]

    def fixed_variables(self) -> list:
        return [v for v in self.variables if not self.is_record(v)]

    def shape(self, var: Variable) -> tuple:
        """Variable shape, with the record dimension at the current numrecs."""
        return tuple(
            self.numrecs if self.dimensions[d].is_unlimited else self.dimensions[d].length
            for d in var.dim_ids
        )

    def record_shape(self, var: Variable) -> tuple:
        """Shape of one record (record variables) or the whole array (fixed)."""
        ids = var.dim_ids[1:] if self.is_record(var) else var.dim_ids
        return tuple(self.dimensions[d].length for d in ids)

    def data_nbytes(self, var: Variable) -> int:
        """Unpadded bytes of a fixed variable, or of one record of a record variable."""
        return math.prod(self.record_shape(var)) * var.type.element_size

    def find_variable(self, name: str) -> Variable | None:
        for v in self.variables:
            if v.name == name:
                return v
        return None

    def copy(self) -> "Schema":
        return copy.deepcopy(self)


# --- validation -----------------------------------------------------------

def _check_name(name, what):
    if not isinstance(name, str) or not name:
        raise InvalidSchema(f"{what} name must be a nonempty string")
    if "\x00" in name:
        raise InvalidSchema(f"{what} name {name!r} contains a NUL byte")


def _check_unique(items, what):
    seen = set()
    for it in items:
        _check_name(it.name, what)
        if it.name in seen:
            raise InvalidSchema(f"duplicate {what} name {it.name!r}")
        seen.add(it.name)


def _check_attribute_values(att: Attribute):
    if att.type in (ExternalType.CHAR, ExternalType.FLOAT, ExternalType.DOUBLE):
        return
    info = np.iinfo(att.type.dtype)
    for v in att.values:
        if not info.min <= v <= info.max:
            raise InvalidSchema(
                f"attribute {att.name!r}: value {v} not representable as {att.type.name}"
            )


def validate(schema: Schema) -> None:
    """Raise InvalidSchema if any structural invariant is violated."""
    _check_unique(schema.dimensions, "dimension")
    _check_unique(schema.global_attributes, "attribute")
    _check_unique(schema.variables, "variable")
    nunlim = 0
    for d in schema.dimensions:
        if d.is_unlimited:
            nunlim += 1
        elif d.length <= 0:
            raise InvalidSchema(f"dimension {d.name!r} must have positive length")
    if nunlim > 1:
        raise InvalidSchema("at most one unlimited dimension is allowed")
    for att in schema.global_attributes:
        _check_attribute_values(att)
    if schema.numrecs < 0:
        raise InvalidSchema("numrecs must be nonnegative")
    ndims = len(schema.dimensions)
    for i, v in enumerate(schema.variables):
        if v.var_id != i:
            raise InvalidSchema(f"variable {v.name!r} has id {v.var_id}, expected {i}")
        _check_unique(v.attributes, "attribute")
        for att in v.attributes:
            _check_attribute_values(att)
        for pos, d in enumerate(v.dim_ids):
            if not 0 <= d < ndims:
                raise InvalidSchema(f"variable {v.name!r}: unknown dimension id {d}")
            if pos > 0 and schema.dimensions[d].is_unlimited:
                raise InvalidSchema(
                    f"variable {v.name!r}: unlimited dimension must be the first dimension"
                )


# --- encoding -------------------------------------------------------------

def _pad(n: int) -> bytes:
    return b"\x00" * (round4(n) - n)


def _encode_name(out: list, name: str) -> None:
    raw = name.encode("utf-8")
    out.append(struct.pack(">I", len(raw)))
    out.append(raw)
    out.append(_pad(len(raw)))


def _encode_attributes(out: list, atts) -> None:
    if not atts:
        out.append(b"\x00" * 8)
        return
    out.append(struct.pack(">II", NC_ATTRIBUTE, len(atts)))
    for att in atts:
        _encode_name(out, att.name)
        if att.type == ExternalType.CHAR:
            payload = att.values
        else:
            payload = np.asarray(att.values, dtype=att.type.dtype).tobytes()
        out.append(struct.pack(">II", int(att.type), len(att.values)))
        out.append(payload)
        out.append(_pad(len(payload)))


def _encode_body(schema: Schema) -> bytes:
    out = [MAGIC, bytes([schema.format_version]), struct.pack(">I", schema.numrecs)]
    if schema.dimensions:
        out.append(struct.pack(">II", NC_DIMENSION, len(schema.dimensions)))
        for d in schema.dimensions:
            _encode_name(out, d.name)
            out.append(struct.pack(">I", 0 if d.is_unlimited else d.length))
    else:
        out.append(b"\x00" * 8)
    _encode_attributes(out, schema.global_attributes)
    if schema.variables:
        out.append(struct.pack(">II", NC_VARIABLE, len(schema.variables)))
        for v in schema.variables:
            _encode_name(out, v.name)
            out.append(struct.pack(">I", len(v.dim_ids)))
            out.append(struct.pack(f">{len(v.dim_ids)}I", *v.dim_ids))
            _encode_attributes(out, v.attributes)
            out.append(struct.pack(">III", int(v.type), v.vsize, v.begin))
    else:
        out.append(b"\x00" * 8)
    return b"".join(out)


def header_length(schema: Schema) -> int:
    """Length in bytes of the encoded header, without trailing fill."""
    return len(_encode_body(schema))


def encode_header(schema: Schema) -> bytes:
    """Encode ``schema`` and zero-fill up to ``schema.data_begin``."""
    validate(schema)
    if schema.format_version != VERSION_CLASSIC:
        raise InvalidSchema(f"cannot encode format version {schema.format_version}")
    body = _encode_body(schema)
    if len(body) > schema.data_begin:
        raise HeaderOverflow(
            f"encoded header is {len(body)} bytes but data begins at {schema.data_begin}"
        )
    return body + b"\x00" * (schema.data_begin - len(body))


# --- decoding -------------------------------------------------------------

class _Reader:
    def __init__(self, buf):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.buf):
            raise TruncatedHeader(
                f"header ends after {len(self.buf)} bytes, needed {n} more", self.pos
            )
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def uint(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def name(self) -> str:
        at = self.pos
        n = self.uint()
        raw = bytes(self.take(n))
        self.take(round4(n) - n)
        if n == 0 or b"\x00" in raw:
            raise MalformedName(f"invalid name {raw!r}", at)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedName(f"name {raw!r} is not valid UTF-8", at) from None

    def list_header(self, tag: int) -> int:
        at = self.pos
        got, n = self.uint(), self.uint()
        if got == 0 and n == 0:
            return 0
        if got != tag:
            raise DecodeError(f"expected list tag {tag}, found {got}", at)
        return n

    def nc_type(self) -> ExternalType:
        at = self.pos
        code = self.uint()
        try:
            return ExternalType(code)
        except ValueError:
            raise DecodeError(f"unknown nc_type {code}", at) from None


def _decode_attributes(r: _Reader) -> list:
    atts = []
    for _ in range(r.list_header(NC_ATTRIBUTE)):
        name = r.name()
        etype = r.nc_type()
        n = r.uint()
        nbytes = n * etype.element_size
        raw = bytes(r.take(nbytes))
        r.take(round4(nbytes) - nbytes)
        if etype == ExternalType.CHAR:
            atts.append(Attribute(name, etype, raw))
        else:
            atts.append(Attribute(name, etype, np.frombuffer(raw, etype.dtype).tolist()))
    return atts


def decode_header(buf) -> Schema:
    """Parse a classic header from the start of ``buf``.

    Trailing bytes past the header (fill or data) are ignored.
    """
    r = _Reader(buf)
    if len(r.buf) < 4:
        if bytes(r.buf[:3]) != MAGIC[: len(r.buf)]:
            raise BadMagic(f"bad magic {bytes(r.buf)!r}", 0)
        raise TruncatedHeader("file too short for magic number", 0)
    magic = bytes(r.take(4))
    if magic[:3] != MAGIC:
        raise BadMagic(f"bad magic {magic[:3]!r}", 0)
    if magic[3] != VERSION_CLASSIC:
        raise UnsupportedVersion(f"unsupported format version {magic[3]}", 3)
    numrecs = r.uint()
    if numrecs == 0xFFFFFFFF:
        raise UnsupportedVersion("streaming numrecs sentinel is not supported", 4)

    dims = []
    for _ in range(r.list_header(NC_DIMENSION)):
        name = r.name()
        length = r.uint()
        dims.append(Dimension(name, length, is_unlimited=(length == 0)))
    gatts = _decode_attributes(r)
    variables = []
    for i in range(r.list_header(NC_VARIABLE)):
        name = r.name()
        nd = r.uint()
        dim_ids = struct.unpack(f">{nd}I", r.take(4 * nd))
        at = r.pos
        for d in dim_ids:
            if d >= len(dims):
                raise DecodeError(f"variable {name!r} references dimension {d}", at)
        atts = _decode_attributes(r)
        etype = r.nc_type()
        vsize = r.uint()
        begin = r.uint()
        variables.append(Variable(name, etype, dim_ids, atts, vsize, begin, i))

    schema = Schema(dims, gatts, variables, numrecs, 0, 0, magic[3])
    hlen = r.pos
    try:
        validate(schema)
    except InvalidSchema as e:
        raise DecodeError(str(e), hlen) from None
    _check_offsets(schema, hlen)

    fixed = schema.fixed_variables()
    recs = schema.record_variables()
    if fixed:
        schema.data_begin = min(v.begin for v in fixed)
    elif recs:
        schema.data_begin = min(v.begin for v in recs)
    else:
        schema.data_begin = hlen
    schema.recsize = _recsize(schema)
    return schema


def _check_offsets(schema: Schema, hlen: int) -> None:
    prev_end = hlen
    fixed_end = hlen
    for v in schema.fixed_variables():
        if v.begin < prev_end:
            raise InconsistentOffsets(
                f"variable {v.name!r} begins at {v.begin}, before offset {prev_end}"
            )
        prev_end = v.begin + v.vsize
        fixed_end = prev_end
    prev_end = fixed_end
    for v in schema.record_variables():
        if v.begin < prev_end:
            raise InconsistentOffsets(
                f"record variable {v.name!r} begins at {v.begin}, before offset {prev_end}"
            )
        prev_end = v.begin + v.vsize


# --- layout ---------------------------------------------------------------

def _recsize(schema: Schema) -> int:
    recs = schema.record_variables()
    if len(recs) == 1:
        # A lone record variable packs its records without padding.
        return schema.data_nbytes(recs[0])
    return sum(v.vsize for v in recs)


def compute_layout(schema: Schema, header_pad: int = 0, *, min_data_begin: int = 0) -> Schema:
    """Return a copy of ``schema`` with vsize, begin, data_begin and recsize set.

    ``min_data_begin`` keeps data from moving toward the header when an
    existing file is redefined.
    """
    if header_pad < 0:
        raise ValueError("header_pad must be nonnegative")
    out = schema.copy()
    for i, v in enumerate(out.variables):
        v.var_id = i
    validate(out)
    recs = out.record_variables()
    for v in out.variables:
        raw = out.data_nbytes(v)
        v.vsize = raw if (len(recs) == 1 and v is recs[0]) else round4(raw)
        if v.vsize > MAX_VSIZE:
            raise OffsetOverflow(f"variable {v.name!r} is too large for the classic format")
    hlen = header_length(out)
    out.data_begin = max(round4(hlen + header_pad), round4(min_data_begin))
    off = out.data_begin
    for v in out.fixed_variables():
        v.begin = off
        off += v.vsize
    for v in recs:
        v.begin = off
        off += v.vsize
    for v in out.variables:
        if v.begin > MAX_OFFSET:
            raise OffsetOverflow(
                f"variable {v.name!r} begins at {v.begin}, beyond the 32-bit offset limit"
            )
    out.recsize = _recsize(out)
    return out


def fixed_data_end(schema: Schema) -> int:
    """File offset just past the fixed-size data (start of the record section)."""
    fixed = schema.fixed_variables()
    if not fixed:
        return schema.data_begin
    last = fixed[-1]
    return last.begin + last.vsize
