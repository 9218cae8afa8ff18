"""Parallel dataset API.

Every rank holds its own ``Dataset`` handle and a private copy of the
schema. Definition and inquiry calls work on that copy only; the root rank
does all header I/O, and ``enddef`` checks that the copies agree before
anything reaches the disk.

Data access comes in two families. The high-level calls take array-like
data plus optional stride/imap vectors. The flexible calls take a raw buffer
plus an explicit ``MemoryLayout``. Each call has an independent form and a
collective ``_all`` form. Both families use the same path: the request is
flattened to file extents, values are converted to external bytes, and the
engine does the transfer.
"""
from __future__ import annotations

import hashlib
import math
import os
import struct

import numpy as np

from . import engine
from .access import (
    AccessRequest,
    MemoryLayout,
    element_offsets,
    flatten_file,
)
from .codec import MemoryType, as_memory_array, decode_values, encode_values, fill_bytes
from .errors import (
    BadDimension,
    BadId,
    CollectiveMismatch,
    DatasetClosed,
    DuplicateName,
    FileError,
    InvalidSchema,
    LayoutMismatch,
    NCError,
    NotInDataMode,
    NotInDefineMode,
    OffsetOverflow,
    OverlapError,
    RelocationOverflow,
    TruncatedHeader,
    TypeMismatch,
)
from .format import (
    NUMRECS_OFFSET,
    Attribute,
    Dimension,
    ExternalType,
    Schema,
    Variable,
    compute_layout,
    decode_header,
    encode_header,
    fixed_data_end,
    header_length,
)

UNLIMITED = 0
GLOBAL = -1
DEFINE = "define"
DATA = "data"

HEADER_CHUNK = 256 * 1024


def _digest(*parts) -> bytes:
    return hashlib.sha256(repr(parts).encode()).digest()


def _infer_external(arr: np.ndarray) -> ExternalType:
    kind, size = arr.dtype.kind, arr.dtype.itemsize
    if kind == "S":
        return ExternalType.CHAR
    if kind == "f":
        return ExternalType.FLOAT if size == 4 else ExternalType.DOUBLE
    if kind in "iub":
        return {1: ExternalType.BYTE, 2: ExternalType.SHORT}.get(size, ExternalType.INT)
    raise TypeMismatch(f"cannot store attribute values of dtype {arr.dtype}")


def _infer_memory(arr: np.ndarray) -> MemoryType:
    try:
        return MemoryType.from_dtype(arr.dtype)
    except TypeMismatch:
        if arr.dtype.kind in "iu":
            return MemoryType.INT64
        if arr.dtype.kind == "f":
            return MemoryType.DOUBLE
        raise


class Dataset:
    """One rank's view of a collectively opened dataset."""

    def __init__(self, group, path, file, schema, mode, hints, *, fill=False,
                 header_pad=0, checked=False, writable=True):
        self.group = group
        self.path = os.fspath(path)
        self.schema = schema
        self.mode = mode
        self.hints = engine.HintSet(hints or {})
        self.numrecs_local = schema.numrecs
        self.fill = fill
        self.header_pad = header_pad
        self.checked = checked
        self.writable = writable
        self._file = file
        self._disk_numrecs = schema.numrecs
        self._before_redef = None

    # --- lifecycle --------------------------------------------------------

    @classmethod
    def create(cls, group, path, hints=None, *, clobber=True, fill=False, header_pad=0,
               checked=False):
        """Collectively create a new dataset, left in define mode."""
        path = os.fspath(path)
        args = _digest("create", path, clobber, fill, header_pad, sorted((hints or {}).items()))
        if not group.all_match(args):
            raise CollectiveMismatch("create called with different arguments across ranks")
        file, error = None, None
        if group.is_root:
            try:
                file = engine.SharedFile(path, group.stats, group.rank, create=True,
                                         exclusive=not clobber)
            except OSError as e:
                error = FileError(f"cannot create {path}: {e}")
        engine.agree(group, error)
        if not group.is_root:
            try:
                file = engine.SharedFile(path, group.stats, group.rank)
            except OSError as e:
                error = FileError(f"cannot open {path}: {e}")
        try:
            engine.agree(group, error)
        except NCError:
            if file is not None:
                file.close()
            raise
        return cls(group, path, file, Schema(), DEFINE, hints, fill=fill,
                   header_pad=header_pad, checked=checked)

    @classmethod
    def open(cls, group, path, hints=None, *, write=False, checked=False):
        """Collectively open an existing dataset in data mode.

        The root reads the header once and broadcasts it; every rank decodes
        its own copy.
        """
        path = os.fspath(path)
        args = _digest("open", path, write, sorted((hints or {}).items()))
        if not group.all_match(args):
            raise CollectiveMismatch("open called with different arguments across ranks")
        file, error = None, None
        try:
            file = engine.SharedFile(path, group.stats, group.rank, writable=write)
        except OSError as e:
            error = FileError(f"cannot open {path}: {e}")
        payload = None
        if group.is_root and error is None:
            try:
                payload = _read_header(file)
            except NCError as e:
                payload = e
        if error is not None and group.is_root:
            payload = error
        payload = group.broadcast(payload)
        try:
            engine.agree(group, error)
            if isinstance(payload, BaseException):
                raise type(payload)(str(payload))
            schema = decode_header(payload)
        except NCError:
            if file is not None:
                file.close()
            raise
        return cls(group, path, file, schema, DATA, hints, checked=checked, writable=write)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if self._file is None:
            return
        if exc_type is None:
            self.close()
        else:
            self.abort()

    @property
    def closed(self) -> bool:
        return self._file is None

    def _require_open(self):
        if self._file is None:
            raise DatasetClosed(f"dataset {self.path} is closed")

    def _require_define(self):
        self._require_open()
        if self.mode != DEFINE:
            raise NotInDefineMode("operation requires define mode (call redef first)")

    def _require_data(self):
        self._require_open()
        if self.mode != DATA:
            raise NotInDataMode("operation requires data mode (call enddef first)")

    def _check_args(self, *parts):
        if self.checked and not self.group.all_match(_digest(*parts)):
            raise CollectiveMismatch(f"{parts[0]} called with different arguments across ranks")

    @property
    def numrecs(self) -> int:
        """Record count visible to this rank, including unsynced independent writes."""
        return max(self.schema.numrecs, self.numrecs_local)

    def redef(self):
        """Collectively re-enter define mode."""
        self._require_data()
        if not self.writable:
            raise FileError("dataset was opened read-only")
        self._gather_numrecs()
        self._before_redef = self.schema.copy()
        self.mode = DEFINE

    def enddef(self):
        """Collectively leave define mode: verify, lay out, relocate, write header."""
        self._require_define()
        old = self._before_redef
        new, digest, error = None, b"", None
        try:
            new = compute_layout(self.schema, self.header_pad,
                                 min_data_begin=old.data_begin if old else 0)
            digest = hashlib.sha256(encode_header(new)).digest()
        except OffsetOverflow as e:
            error = RelocationOverflow(str(e)) if old is not None else e
        except NCError as e:
            error = e
        engine.agree(self.group, error)
        if not self.group.all_match(digest):
            raise CollectiveMismatch("dataset definitions differ across ranks at enddef")

        if old is not None:
            self._relocate(old, new)
        error = None
        if self.group.is_root:
            try:
                self._file.pwrite(0, encode_header(new), kind="header")
                if self.fill:
                    self._fill_new_variables(old, new)
            except NCError as e:
                error = e
        engine.agree(self.group, error)
        self.schema = new
        self.numrecs_local = new.numrecs
        self._disk_numrecs = new.numrecs
        self._before_redef = None
        self.mode = DATA

    def sync(self):
        """Collectively agree on numrecs, write it to the header, flush."""
        self._require_data()
        self._gather_numrecs()
        error = None
        try:
            if self.group.is_root and self.writable:
                if self.schema.numrecs != self._disk_numrecs:
                    self._file.pwrite(NUMRECS_OFFSET, struct.pack(">I", self.schema.numrecs),
                                      kind="header")
                self._extend_file()
            if self.writable:
                self._file.flush()
        except (NCError, OSError) as e:
            error = e if isinstance(e, NCError) else FileError(str(e))
        engine.agree(self.group, error)
        self._disk_numrecs = self.schema.numrecs

    def close(self):
        """Collectively finish pending define/sync work and release the file."""
        self._require_open()
        try:
            if self.mode == DEFINE:
                self.enddef()
            self.sync()
        finally:
            self.abort()

    def abort(self):
        """Release this rank's file handle without writing anything."""
        if self._file is not None:
            self._file.close()
            self._file = None

    def _gather_numrecs(self):
        counts = self.group.all_gather(self.numrecs)
        self.schema.numrecs = max(counts)
        self.numrecs_local = self.schema.numrecs

    def _extend_file(self):
        end = fixed_data_end(self.schema) + self.schema.numrecs * self.schema.recsize
        if self._file.size() < end:
            os.ftruncate(self._file.fd, end)
            self.group.stats.incr("file_extends", self.group.rank)

    # --- relocation -------------------------------------------------------

    def _relocate(self, old: Schema, new: Schema):
        """Move existing data to its new offsets after a redefinition.

        Pieces are moved highest source offset first, in batches; within a
        batch every rank reads its equal share before any rank writes.
        Offsets never decrease, so a batch cannot overwrite unmoved data.
        """
        pieces = []
        for v in old.variables:
            nv = new.variables[v.var_id]
            nbytes = old.data_nbytes(v)
            if old.is_record(v):
                for r in range(old.numrecs):
                    pieces.append((v.begin + r * old.recsize, nv.begin + r * new.recsize, nbytes))
            else:
                pieces.append((v.begin, nv.begin, nbytes))
        pieces = [p for p in pieces if p[0] != p[1] and p[2] > 0]
        if not pieces:
            return
        batch_limit = self.hints.buffer_size
        chunks = []
        for src, dst, n in pieces:
            for k in range(0, n, batch_limit):
                m = min(batch_limit, n - k)
                chunks.append((src + k, dst + k, m))
        chunks.sort(reverse=True)

        batch, size = [], 0
        for c in chunks:
            if batch and size + c[2] > batch_limit:
                self._move_batch(batch, size)
                batch, size = [], 0
            batch.append(c)
            size += c[2]
        if batch:
            self._move_batch(batch, size)

    def _move_batch(self, batch, total):
        g = self.group
        share = math.ceil(total / g.size)
        lo, hi = g.rank * share, min((g.rank + 1) * share, total)
        moves, error = [], None
        try:
            pos = 0
            for src, dst, n in batch:
                a, b = max(lo, pos), min(hi, pos + n)
                if a < b:
                    moves.append((dst + a - pos, self._file.pread(src + a - pos, b - a)))
                pos += n
        except NCError as e:
            error = e
        engine.agree(g, error)
        try:
            for dst, data in moves:
                self._file.pwrite(dst, data)
        except NCError as e:
            error = e
        engine.agree(g, error)

    def _fill_new_variables(self, old, new):
        old_count = len(old.variables) if old else 0
        for v in new.variables[old_count:]:
            n = new.data_nbytes(v) // v.type.element_size
            if new.is_record(v):
                for r in range(new.numrecs):
                    self._file.pwrite(v.begin + r * new.recsize, fill_bytes(v.type, n))
            else:
                self._file.pwrite(v.begin, fill_bytes(v.type, n))

    def _fill_records(self, first, last):
        s = self.schema
        for v in s.record_variables():
            n = s.data_nbytes(v) // v.type.element_size
            for r in range(first, last):
                self._file.pwrite(v.begin + r * s.recsize, fill_bytes(v.type, n))

    # --- define mode ------------------------------------------------------

    def def_dim(self, name: str, length: int) -> int:
        self._require_define()
        self._check_args("def_dim", name, length)
        if any(d.name == name for d in self.schema.dimensions):
            raise DuplicateName(f"dimension {name!r} already exists")
        if not isinstance(name, str) or not name or "\x00" in name:
            raise InvalidSchema(f"invalid dimension name {name!r}")
        if length is None or length == UNLIMITED:
            if self.schema.unlimited_dim_id is not None:
                raise BadDimension("dataset already has an unlimited dimension")
            self.schema.dimensions.append(Dimension(name, 0, is_unlimited=True))
        else:
            if length < 0 or length > 2**31 - 1:
                raise BadDimension(f"invalid length {length} for dimension {name!r}")
            self.schema.dimensions.append(Dimension(name, int(length)))
        return len(self.schema.dimensions) - 1

    def def_var(self, name: str, etype, dim_ids) -> int:
        self._require_define()
        etype = ExternalType.from_name(etype) if isinstance(etype, str) else ExternalType(etype)
        dim_ids = tuple(self._dim_id(d) for d in dim_ids)
        self._check_args("def_var", name, int(etype), dim_ids)
        if self.schema.find_variable(name) is not None:
            raise DuplicateName(f"variable {name!r} already exists")
        if not isinstance(name, str) or not name or "\x00" in name:
            raise InvalidSchema(f"invalid variable name {name!r}")
        for pos, d in enumerate(dim_ids):
            if pos > 0 and self.schema.dimensions[d].is_unlimited:
                raise BadDimension("the unlimited dimension must be the first dimension")
        var_id = len(self.schema.variables)
        self.schema.variables.append(Variable(name, etype, dim_ids, var_id=var_id))
        return var_id

    def _dim_id(self, d) -> int:
        if isinstance(d, str):
            return self.inq_dimid(d)
        if not 0 <= d < len(self.schema.dimensions):
            raise BadDimension(f"no dimension with id {d}")
        return int(d)

    def _var(self, var) -> Variable:
        if isinstance(var, str):
            var = self.inq_varid(var)
        if not 0 <= var < len(self.schema.variables):
            raise BadId(f"no variable with id {var}")
        return self.schema.variables[var]

    def _attributes(self, schema, var) -> list:
        if var == GLOBAL or var is None:
            return schema.global_attributes
        if isinstance(var, str):
            var = self.inq_varid(var)
        if not 0 <= var < len(schema.variables):
            raise BadId(f"no variable with id {var}")
        return schema.variables[var].attributes

    def put_att(self, var, name: str, values, etype=None):
        """Create or replace an attribute on ``var`` (or ``GLOBAL``)."""
        self._require_open()
        if not isinstance(name, str) or not name or "\x00" in name:
            raise InvalidSchema(f"invalid attribute name {name!r}")
        if isinstance(values, (str, bytes, bytearray)):
            etype = ExternalType.CHAR if etype is None else ExternalType(etype)
            if etype != ExternalType.CHAR:
                raise TypeMismatch("text attributes must have type CHAR")
            att = Attribute(name, etype, values)
        else:
            arr = np.asarray(values).reshape(-1)
            if arr.dtype == object or arr.dtype.kind == "U":
                raise TypeMismatch(f"cannot store attribute values {values!r}")
            etype = _infer_external(arr) if etype is None else ExternalType(etype)
            if etype == ExternalType.CHAR:
                raise TypeMismatch("CHAR attributes need text values")
            mtype = _infer_memory(arr)
            raw = encode_values(etype, mtype, arr)
            att = Attribute(name, etype, np.frombuffer(raw, etype.dtype).tolist())
        self._check_args("put_att", var, name, att.type, att.values)

        if self.mode == DEFINE:
            _replace_att(self._attributes(self.schema, var), att)
            return
        candidate = self.schema.copy()
        _replace_att(self._attributes(candidate, var), att)
        if header_length(candidate) > candidate.data_begin:
            raise NotInDefineMode("attribute does not fit in the header; call redef first")
        if not self.group.all_match(hashlib.sha256(encode_header(candidate)).digest()):
            raise CollectiveMismatch("put_att arguments differ across ranks")
        error = None
        if self.group.is_root:
            try:
                self._file.pwrite(0, encode_header(candidate), kind="header")
            except NCError as e:
                error = e
        engine.agree(self.group, error)
        self.schema = candidate

    def get_att(self, var, name: str):
        """Attribute values: ``bytes`` for CHAR, a numpy array otherwise."""
        self._require_open()
        att = self._find_att(var, name)
        if att.type == ExternalType.CHAR:
            return att.values
        return np.asarray(att.values, dtype=MemoryType.for_external(att.type).dtype)

    def del_att(self, var, name: str):
        self._require_define()
        self._check_args("del_att", var, name)
        atts = self._attributes(self.schema, var)
        att = self._find_att(var, name)
        atts.remove(att)

    def _find_att(self, var, name):
        for att in self._attributes(self.schema, var):
            if att.name == name:
                return att
        raise KeyError(f"no attribute {name!r}")

    # --- inquiry ----------------------------------------------------------
    # Served from the local schema copy: no file I/O, no synchronization.

    def inq_ndims(self) -> int:
        return len(self.schema.dimensions)

    def inq_nvars(self) -> int:
        return len(self.schema.variables)

    def inq_natts(self, var=GLOBAL) -> int:
        return len(self._attributes(self.schema, var))

    def inq_unlimdim(self):
        return self.schema.unlimited_dim_id

    def inq_dim(self, dim_id: int) -> tuple:
        d = self.schema.dimensions[self._dim_id(dim_id)]
        return d.name, (self.numrecs if d.is_unlimited else d.length)

    def inq_dimid(self, name: str) -> int:
        for i, d in enumerate(self.schema.dimensions):
            if d.name == name:
                return i
        raise BadDimension(f"no dimension named {name!r}")

    def inq_var(self, var) -> tuple:
        v = self._var(var)
        return v.name, v.type, len(v.dim_ids), list(v.dim_ids)

    def inq_varid(self, name: str) -> int:
        v = self.schema.find_variable(name)
        if v is None:
            raise BadId(f"no variable named {name!r}")
        return v.var_id

    def inq_att(self, var, name: str) -> tuple:
        att = self._find_att(var, name)
        return att.type, len(att.values)

    def inq_varshape(self, var) -> tuple:
        v = self._var(var)
        return tuple(
            self.numrecs if self.schema.dimensions[d].is_unlimited
            else self.schema.dimensions[d].length
            for d in v.dim_ids
        )

    # --- data access core -------------------------------------------------

    def _write(self, op, var, start, count, stride, imap, data, mtype, *, collective,
               layout=None):
        extents, payload, new_numrecs, is_rec, error = [], b"", 0, False, None
        try:
            self._require_data()
            if not self.writable:
                raise FileError("dataset was opened read-only")
            v = self._var(var)
            is_rec = self.schema.is_record(v)
            req = AccessRequest(v.var_id, start, count, stride, imap)
            extents = flatten_file(self.schema, req, for_write=True, numrecs=self.numrecs)
            payload = self._pack(v, req, data, mtype, layout)
            if is_rec and req.nelems:
                new_numrecs = req.start[0] + (req.count[0] - 1) * req.strides[0] + 1
        except NCError as e:
            if not collective:
                raise
            error = e
        if not collective:
            if new_numrecs > self.numrecs:
                if self.fill:
                    self._fill_records(self.numrecs, new_numrecs)
                self.numrecs_local = new_numrecs
            return engine.independent_write(self._file, extents, payload)

        engine.agree(self.group, error)
        if self.checked:
            self._check_args(op, self._var(var).var_id)
        if is_rec:
            grown = max(self.group.all_gather(new_numrecs))
            if grown > self.schema.numrecs:
                err = None
                if self.fill and self.group.is_root:
                    try:
                        self._fill_records(self.schema.numrecs, grown)
                    except NCError as e:
                        err = e
                if self.fill:
                    engine.agree(self.group, err)
                self.schema.numrecs = grown
                self.numrecs_local = max(self.numrecs_local, grown)
        plan = engine.plan_two_phase(self.group, extents, self.hints, for_write=True)
        return engine.collective_write(self.group, self._file, plan, payload)

    def _pack(self, v, req, data, mtype, layout) -> bytes:
        """External bytes of the selection, in file order."""
        if layout is not None:
            if mtype is None:
                raise TypeMismatch("flexible access needs an explicit memory type")
            mtype = MemoryType(mtype)
            need = req.nelems * mtype.element_size
            if layout.total_bytes != need:
                raise LayoutMismatch(
                    f"layout describes {layout.total_bytes} bytes, selection needs {need}"
                )
            view = _byte_view(data)
            if layout.is_contiguous:
                packed = view[:need]
            else:
                if any(o + n > len(view) for o, n in layout.runs):
                    raise LayoutMismatch("layout runs extend past the end of the buffer")
                packed = b"".join(view[o:o + n] for o, n in layout.runs)
            values = np.frombuffer(packed, dtype=mtype.dtype)
            return encode_values(v.type, mtype, values)

        if mtype is None:
            if v.type == ExternalType.CHAR:
                mtype = MemoryType.CHAR
            else:
                mtype = _infer_memory(np.asarray(data))
        mtype = MemoryType(mtype)
        arr = as_memory_array(mtype, data)
        if req.imap is None:
            if arr.size != req.nelems:
                raise LayoutMismatch(f"got {arr.size} values for a selection of {req.nelems}")
            values = arr
        else:
            offs = element_offsets(req.count, req.imap)
            if offs.size and offs.max() >= arr.size:
                raise LayoutMismatch("imap addresses elements past the end of the buffer")
            if offs.size != np.unique(offs).size:
                raise OverlapError("imap maps two selected elements to the same memory location")
            values = arr[offs]
        return encode_values(v.type, mtype, values)

    def _read(self, op, var, start, count, stride, imap, mtype, *, collective, layout=None,
              out=None):
        extents, v, req, error = [], None, None, None
        try:
            self._require_data()
            v = self._var(var)
            req = AccessRequest(v.var_id, start, count, stride, imap)
            extents = flatten_file(self.schema, req, numrecs=self.numrecs)
            if layout is not None:
                if mtype is None:
                    raise TypeMismatch("flexible access needs an explicit memory type")
                need = req.nelems * MemoryType(mtype).element_size
                if layout.total_bytes != need:
                    raise LayoutMismatch(
                        f"layout describes {layout.total_bytes} bytes, selection needs {need}"
                    )
        except NCError as e:
            if not collective:
                raise
            error = e
        if collective:
            engine.agree(self.group, error)
            if self.checked:
                self._check_args(op, v.var_id)
            plan = engine.plan_two_phase(self.group, extents, self.hints, for_write=False)
            raw = engine.collective_read(self.group, self._file, plan)
        else:
            raw = engine.independent_read(self._file, extents)

        mtype = MemoryType.for_external(v.type) if mtype is None else MemoryType(mtype)
        values = decode_values(v.type, mtype, raw)
        if layout is not None:
            view = _byte_view(out, writable=True)
            packed = values.tobytes()
            pos = 0
            for o, n in layout.runs:
                view[o:o + n] = packed[pos:pos + n]
                pos += n
            return out
        if req.imap is None:
            return values.reshape(req.count)
        offs = element_offsets(req.count, req.imap)
        size = int(offs.max()) + 1 if offs.size else 0
        if out is None:
            out = np.zeros(size, dtype=mtype.dtype)
        elif out.size < size:
            raise LayoutMismatch("output buffer too small for imap")
        out.reshape(-1)[offs] = values
        return out

    def _whole(self, v, data=None):
        shape = list(self.inq_varshape(v.var_id))
        if data is not None and self.schema.is_record(v):
            arr = np.asarray(data)
            if arr.ndim == len(shape):
                shape[0] = arr.shape[0]
        return (0,) * len(shape), tuple(shape)

    # --- high-level API ---------------------------------------------------

    def put_var1(self, var, index, value, mtype=None):
        return self._write("put_var1", var, index, (1,) * len(index), None, None,
                           np.asarray(value).reshape(1) if not isinstance(value, (bytes, str))
                           else value, mtype, collective=False)

    def put_var1_all(self, var, index, value, mtype=None):
        return self._write("put_var1", var, index, (1,) * len(index), None, None,
                           np.asarray(value).reshape(1) if not isinstance(value, (bytes, str))
                           else value, mtype, collective=True)

    def put_var(self, var, data, mtype=None):
        start, count = self._whole(self._var(var), data)
        return self._write("put_var", var, start, count, None, None, data, mtype,
                           collective=False)

    def put_var_all(self, var, data, mtype=None):
        start, count = self._whole(self._var(var), data)
        return self._write("put_var", var, start, count, None, None, data, mtype,
                           collective=True)

    def put_vara(self, var, start, count, data, mtype=None):
        return self._write("put_vara", var, start, count, None, None, data, mtype,
                           collective=False)

    def put_vara_all(self, var, start, count, data, mtype=None):
        return self._write("put_vara", var, start, count, None, None, data, mtype,
                           collective=True)

    def put_vars(self, var, start, count, stride, data, mtype=None):
        return self._write("put_vars", var, start, count, stride, None, data, mtype,
                           collective=False)

    def put_vars_all(self, var, start, count, stride, data, mtype=None):
        return self._write("put_vars", var, start, count, stride, None, data, mtype,
                           collective=True)

    def put_varm(self, var, start, count, stride, imap, data, mtype=None):
        return self._write("put_varm", var, start, count, stride, imap, data, mtype,
                           collective=False)

    def put_varm_all(self, var, start, count, stride, imap, data, mtype=None):
        return self._write("put_varm", var, start, count, stride, imap, data, mtype,
                           collective=True)

    def get_var1(self, var, index, mtype=None):
        return self._read("get_var1", var, index, (1,) * len(index), None, None, mtype,
                          collective=False).reshape(-1)[0]

    def get_var1_all(self, var, index, mtype=None):
        return self._read("get_var1", var, index, (1,) * len(index), None, None, mtype,
                          collective=True).reshape(-1)[0]

    def get_var(self, var, mtype=None):
        start, count = self._whole(self._var(var))
        return self._read("get_var", var, start, count, None, None, mtype, collective=False)

    def get_var_all(self, var, mtype=None):
        start, count = self._whole(self._var(var))
        return self._read("get_var", var, start, count, None, None, mtype, collective=True)

    def get_vara(self, var, start, count, mtype=None):
        return self._read("get_vara", var, start, count, None, None, mtype, collective=False)

    def get_vara_all(self, var, start, count, mtype=None):
        return self._read("get_vara", var, start, count, None, None, mtype, collective=True)

    def get_vars(self, var, start, count, stride, mtype=None):
        return self._read("get_vars", var, start, count, stride, None, mtype, collective=False)

    def get_vars_all(self, var, start, count, stride, mtype=None):
        return self._read("get_vars", var, start, count, stride, None, mtype, collective=True)

    def get_varm(self, var, start, count, stride, imap, mtype=None, out=None):
        return self._read("get_varm", var, start, count, stride, imap, mtype,
                          collective=False, out=out)

    def get_varm_all(self, var, start, count, stride, imap, mtype=None, out=None):
        return self._read("get_varm", var, start, count, stride, imap, mtype,
                          collective=True, out=out)

    # --- flexible API -----------------------------------------------------

    def put_vara_flex(self, var, start, count, stride, layout: MemoryLayout, mtype, buffer):
        return self._write("put_flex", var, start, count, stride, None, buffer, mtype,
                           collective=False, layout=layout)

    def put_vara_all_flex(self, var, start, count, stride, layout: MemoryLayout, mtype, buffer):
        return self._write("put_flex", var, start, count, stride, None, buffer, mtype,
                           collective=True, layout=layout)

    def get_vara_flex(self, var, start, count, stride, layout: MemoryLayout, mtype, buffer):
        return self._read("get_flex", var, start, count, stride, None, mtype,
                          collective=False, layout=layout, out=buffer)

    def get_vara_all_flex(self, var, start, count, stride, layout: MemoryLayout, mtype, buffer):
        return self._read("get_flex", var, start, count, stride, None, mtype,
                          collective=True, layout=layout, out=buffer)


def _replace_att(atts: list, att: Attribute):
    for i, a in enumerate(atts):
        if a.name == att.name:
            atts[i] = att
            return
    atts.append(att)


def _byte_view(buf, writable=False) -> memoryview:
    if isinstance(buf, np.ndarray):
        if not buf.flags.c_contiguous:
            raise LayoutMismatch("flexible buffers must be C-contiguous")
        view = memoryview(buf.reshape(-1).view(np.uint8))
    else:
        view = memoryview(buf).cast("B")
    if writable and view.readonly:
        raise LayoutMismatch("output buffer is read-only")
    return view


def _read_header(file) -> bytes:
    """Root-side header fetch: one read unless the header outgrows the first chunk."""
    size = file.size()
    n = min(size, HEADER_CHUNK)
    while True:
        buf = file.pread(0, n, kind="header")
        try:
            schema = decode_header(buf)
        except TruncatedHeader:
            if n >= size:
                raise
            n = min(size, n * 4)
            continue
        return buf[:header_length(schema)]


create = Dataset.create
open = Dataset.open  # noqa: A001 - mirrors the collective open of the C API
