"""Flatten array selections into file extents and memory runs.

All five access methods (single value, whole array, subarray, strided
subarray, mapped strided subarray) reduce to one ``AccessRequest``. A
request flattens to a sorted, adjacency-merged list of ``Extent`` on the
file side and a ``MemoryLayout`` on the buffer side. The k-th selected
element in file order always pairs with the k-th element of the memory
layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BadId, OutOfBounds, OverlapError, RankMismatch
from .format import Schema


class Extent(NamedTuple):
    offset: int
    length: int


@dataclass(frozen=True)
class MemoryLayout:
    """Byte runs ``(offset, length)`` relative to a buffer base, in file order."""

    runs: tuple

    @property
    def total_bytes(self) -> int:
        return sum(n for _, n in self.runs)

    @property
    def is_contiguous(self) -> bool:
        return len(self.runs) <= 1 and all(off == 0 for off, _ in self.runs)

    @classmethod
    def contiguous(cls, nbytes: int) -> "MemoryLayout":
        return cls(((0, nbytes),) if nbytes else ())

    @classmethod
    def from_element_offsets(cls, offsets: np.ndarray, element_size: int) -> "MemoryLayout":
        return cls(tuple(_runs(np.asarray(offsets, dtype=np.int64) * element_size, element_size)))


@dataclass(frozen=True)
class AccessRequest:
    var_id: int
    start: tuple
    count: tuple
    stride: tuple | None = None
    imap: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(int(s) for s in self.start))
        object.__setattr__(self, "count", tuple(int(c) for c in self.count))
        if self.stride is not None:
            object.__setattr__(self, "stride", tuple(int(s) for s in self.stride))
        if self.imap is not None:
            object.__setattr__(self, "imap", tuple(int(s) for s in self.imap))

    @property
    def rank(self) -> int:
        return len(self.count)

    @property
    def strides(self) -> tuple:
        return self.stride if self.stride is not None else (1,) * self.rank

    @property
    def imaps(self) -> tuple:
        return self.imap if self.imap is not None else row_major_strides(self.count)

    @property
    def nelems(self) -> int:
        return math.prod(self.count)


def row_major_strides(shape: Sequence[int]) -> tuple:
    out, acc = [], 1
    for n in reversed(shape):
        out.append(acc)
        acc *= n
    return tuple(reversed(out))


def _runs(offsets: np.ndarray, length: int) -> list:
    """Merge equal-length pieces at ``offsets`` (in order) into (offset, length) runs."""
    if offsets.size == 0:
        return []
    breaks = np.nonzero(offsets[1:] != offsets[:-1] + length)[0] + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [offsets.size]))
    return [
        (int(offsets[s]), int((e - s) * length))
        for s, e in zip(starts.tolist(), ends.tolist())
    ]


def _grid(bases: Sequence[np.ndarray]) -> np.ndarray:
    """Row-major sum of per-dimension offset vectors, flattened."""
    total = np.zeros((), dtype=np.int64)
    for b in bases:
        total = np.add.outer(total, b)
    return total.reshape(-1)


def validate_request(schema: Schema, req: AccessRequest, *, for_write=False, numrecs=None):
    """Check ``req`` against ``schema``; return the target variable."""
    if not 0 <= req.var_id < len(schema.variables):
        raise BadId(f"no variable with id {req.var_id}")
    var = schema.variables[req.var_id]
    ndims = len(var.dim_ids)
    for label, vec in (("start", req.start), ("count", req.count),
                       ("stride", req.stride), ("imap", req.imap)):
        if vec is not None and len(vec) != ndims:
            raise RankMismatch(
                f"{label} has {len(vec)} entries, variable {var.name!r} has rank {ndims}"
            )
    is_rec = schema.is_record(var)
    nrec = schema.numrecs if numrecs is None else numrecs
    for i, d in enumerate(var.dim_ids):
        s, c, st = req.start[i], req.count[i], req.strides[i]
        if s < 0 or c < 0:
            raise OutOfBounds(f"negative start/count on dimension {i}")
        if st < 1:
            raise OutOfBounds(f"stride must be >= 1 on dimension {i}")
        if i == 0 and is_rec:
            if for_write:
                continue
            limit = nrec
        else:
            limit = schema.dimensions[d].length
        if c == 0:
            if s > limit:
                raise OutOfBounds(f"start {s} beyond dimension {i} of length {limit}")
        elif s + (c - 1) * st >= limit:
            raise OutOfBounds(
                f"selection {s}+({c}-1)*{st} exceeds dimension {i} of length {limit}"
            )
    if req.imap is not None and any(m < 0 for m in req.imap):
        raise OutOfBounds("negative imap entries are not supported")
    return var


def _byte_strides(schema: Schema, var) -> list:
    esize = var.type.element_size
    rshape = schema.record_shape(var)
    inner = [esize * s for s in row_major_strides(rshape)]
    return [schema.recsize] + inner if schema.is_record(var) else inner


def flatten_file(schema: Schema, req: AccessRequest, *, for_write=False, numrecs=None) -> list:
    """Sorted, merged file extents covering exactly the selected elements."""
    var = validate_request(schema, req, for_write=for_write, numrecs=numrecs)
    if req.nelems == 0:
        return []
    esize = var.type.element_size
    ndims = len(var.dim_ids)
    if ndims == 0:
        return [Extent(var.begin, esize)]
    bstride = _byte_strides(schema, var)
    is_rec = schema.is_record(var)
    start, count, stride = req.start, req.count, req.strides

    # Fold trailing fully-selected dimensions, then one unit-stride partial
    # dimension, into a single contiguous run length.
    run, d = esize, ndims - 1
    while d >= 0 and not (d == 0 and is_rec):
        length = schema.dimensions[var.dim_ids[d]].length
        if start[d] == 0 and count[d] == length and stride[d] == 1:
            run *= length
            d -= 1
        else:
            break
    base = var.begin
    if d >= 0 and stride[d] == 1 and not (d == 0 and is_rec):
        run *= count[d]
        base += start[d] * bstride[d]
        d -= 1

    outer = [
        (start[i] + stride[i] * np.arange(count[i], dtype=np.int64)) * bstride[i]
        for i in range(d + 1)
    ]
    offsets = base + _grid(outer)
    return [Extent(o, n) for o, n in _runs(offsets, run)]


def element_offsets(count: Sequence[int], imap: Sequence[int]) -> np.ndarray:
    """Memory element offset of each selected element, in file order."""
    return _grid([np.arange(c, dtype=np.int64) * m for c, m in zip(count, imap)])


def flatten_memory(schema: Schema, req: AccessRequest, mtype, *, for_write=False) -> MemoryLayout:
    """Memory runs for ``req`` in file order, in bytes of ``mtype`` elements."""
    validate_request(schema, req, for_write=True)
    offs = element_offsets(req.count, req.imaps)
    if for_write and offs.size != np.unique(offs).size:
        raise OverlapError("imap maps two selected elements to the same memory location")
    return MemoryLayout.from_element_offsets(offs, mtype.element_size)


def merge_extents(extents) -> list:
    """Sort and merge adjacent extents; overlapping input is an error."""
    items = sorted(Extent(int(o), int(n)) for o, n in extents if n > 0)
    out = []
    for off, n in items:
        if out:
            last_off, last_n = out[-1]
            end = last_off + last_n
            if off < end:
                raise OverlapError(f"extent ({off},{n}) overlaps ({last_off},{last_n})")
            if off == end:
                out[-1] = Extent(last_off, last_n + n)
                continue
        out.append(Extent(off, n))
    return out


def union_extents(extents) -> list:
    """Like ``merge_extents`` but overlapping extents are coalesced."""
    items = sorted(Extent(int(o), int(n)) for o, n in extents if n > 0)
    out = []
    for off, n in items:
        if out and off <= out[-1].offset + out[-1].length:
            last = out[-1]
            out[-1] = Extent(last.offset, max(last.offset + last.length, off + n) - last.offset)
        else:
            out.append(Extent(off, n))
    return out
