"""Conversion between in-memory element arrays and big-endian external bytes.

Widening conversions always succeed. Narrowing conversions are range-checked
and raise RangeError instead of clamping; float to integer truncates toward
zero after the check. CHAR never converts to or from a numeric type.
"""
from __future__ import annotations

import enum

import numpy as np

from .errors import RangeError, TypeMismatch
from .format import ExternalType


class MemoryType(enum.Enum):
    BYTE = "i1"
    UBYTE = "u1"
    CHAR = "S1"
    SHORT = "i2"
    INT = "i4"
    INT64 = "i8"
    FLOAT = "f4"
    DOUBLE = "f8"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.value)

    @property
    def element_size(self) -> int:
        return self.dtype.itemsize

    @classmethod
    def from_dtype(cls, dtype) -> "MemoryType":
        dt = np.dtype(dtype)
        if dt.kind == "S":
            return cls.CHAR
        if dt.kind == "b":
            return cls.UBYTE
        key = dt.newbyteorder("=").str[1:]
        for m in cls:
            if m.value == key:
                return m
        raise TypeMismatch(f"no memory type for dtype {dt}")

    @classmethod
    def for_external(cls, etype: ExternalType) -> "MemoryType":
        """The identity-convertible memory type of ``etype``."""
        return _IDENTITY[ExternalType(etype)]


_IDENTITY = {
    ExternalType.BYTE: MemoryType.BYTE,
    ExternalType.CHAR: MemoryType.CHAR,
    ExternalType.SHORT: MemoryType.SHORT,
    ExternalType.INT: MemoryType.INT,
    ExternalType.FLOAT: MemoryType.FLOAT,
    ExternalType.DOUBLE: MemoryType.DOUBLE,
}

FILL_VALUES = {
    ExternalType.BYTE: -127,
    ExternalType.CHAR: b"\x00",
    ExternalType.SHORT: -32767,
    ExternalType.INT: -2147483647,
    ExternalType.FLOAT: 9.9692099683868690e36,
    ExternalType.DOUBLE: 9.9692099683868690e36,
}


def fill_bytes(etype: ExternalType, count: int) -> bytes:
    """External encoding of ``count`` default fill values."""
    etype = ExternalType(etype)
    if etype == ExternalType.CHAR:
        return b"\x00" * count
    return np.full(count, FILL_VALUES[etype], dtype=etype.dtype).tobytes()


def convert(arr: np.ndarray, target) -> np.ndarray:
    """Checked element-wise conversion of ``arr`` to dtype ``target``."""
    dst = np.dtype(target)
    src = arr.dtype
    src_char, dst_char = src.kind == "S", dst.kind == "S"
    if src_char or dst_char:
        if src_char and dst_char:
            return arr.astype(dst)
        raise TypeMismatch(f"cannot convert between {src} and {dst}")
    if src.kind == "b":
        arr = arr.astype(np.uint8)
        src = arr.dtype
    if arr.size == 0:
        return arr.astype(dst)

    if dst.kind in "iu":
        info = np.iinfo(dst)
        if src.kind == "f":
            if not np.all(np.isfinite(arr)):
                raise RangeError(f"non-finite value cannot be stored as {dst}")
            arr = np.trunc(arr)
            lo, hi = arr.min(), arr.max()
        else:
            lo, hi = int(arr.min()), int(arr.max())
        if lo < info.min or hi > info.max:
            bad = lo if lo < info.min else hi
            raise RangeError(f"value {bad} out of range for {dst}")
        return arr.astype(dst)

    if dst.kind == "f" and src.kind == "f" and dst.itemsize < src.itemsize:
        finite = arr[np.isfinite(arr)]
        if finite.size and np.abs(finite).max() > np.finfo(dst).max:
            raise RangeError(f"value out of range for {dst}")
    return arr.astype(dst)


def as_memory_array(mtype: MemoryType, values) -> np.ndarray:
    """Coerce ``values`` into a flat array of ``mtype`` elements."""
    if mtype == MemoryType.CHAR:
        if isinstance(values, str):
            values = values.encode("utf-8")
        if isinstance(values, (bytes, bytearray, memoryview)):
            return np.frombuffer(bytes(values), dtype="S1")
    arr = np.asarray(values)
    if arr.dtype.kind == "U":
        raise TypeMismatch("text values need a CHAR memory type and byte strings")
    if arr.dtype.kind == "O":
        raise TypeMismatch(f"cannot interpret values of dtype {arr.dtype}")
    arr = arr.reshape(-1)
    if arr.dtype != mtype.dtype:
        arr = convert(arr, mtype.dtype)
    return arr


def encode_values(etype: ExternalType, mtype: MemoryType, values) -> bytes:
    """Pack ``values`` (of memory type ``mtype``) as big-endian ``etype`` bytes."""
    etype = ExternalType(etype)
    arr = as_memory_array(mtype, values)
    return convert(arr, etype.dtype).tobytes()


def decode_values(etype: ExternalType, mtype: MemoryType, buf) -> np.ndarray:
    """Unpack big-endian ``etype`` bytes into a native ``mtype`` array."""
    etype = ExternalType(etype)
    raw = np.frombuffer(buf, dtype=etype.dtype)
    return convert(raw, mtype.dtype)
