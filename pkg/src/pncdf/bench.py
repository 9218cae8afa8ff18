"""Access-pattern benchmarks used as correctness oracles.

``bench_partition`` writes or reads a 3-D array ``tt(Z,Y,X)`` split across
ranks along any combination of axes. ``bench_flash`` writes many block-
partitioned variables the way the FLASH checkpoint does. Both report phase
timings, physical file-operation counts from the engine counters, and a
SHA-256 digest of the resulting file. The digest lets runs with different
rank counts be compared byte for byte.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import dataset as ncds
from .access import MemoryLayout, element_offsets, row_major_strides
from .codec import MemoryType
from .format import ExternalType

CSV_COLUMNS = ("pattern", "n", "bytes", "phase", "seconds", "ops")


class PartitionPattern(enum.Enum):
    Z = "Z"
    Y = "Y"
    X = "X"
    ZY = "ZY"
    ZX = "ZX"
    YX = "YX"
    ZYX = "ZYX"
    BLOCK = "BLOCK"

    @property
    def axes(self) -> tuple:
        if self is PartitionPattern.BLOCK:
            return (0,)
        return tuple("ZYX".index(c) for c in self.value)


PATTERNS_3D = tuple(p for p in PartitionPattern if p is not PartitionPattern.BLOCK)


@dataclass
class BenchReport:
    pattern: str
    n: int
    shape: tuple
    etype: str
    total_bytes: int
    file_bytes: int
    data_bytes: int
    digest: str
    seconds: dict = field(default_factory=dict)
    ops: dict = field(default_factory=dict)
    mismatches: int = 0

    def rows(self) -> list:
        return [
            (self.pattern, self.n, self.total_bytes, phase, f"{sec:.6f}", self.ops.get(phase, 0))
            for phase, sec in self.seconds.items()
        ]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(CSV_COLUMNS)
        w.writerows(self.rows())
        return buf.getvalue()

    def bandwidth(self, phase: str) -> float:
        """MB/s for ``phase``; informational only."""
        sec = self.seconds.get(phase, 0.0)
        return self.total_bytes / sec / 1e6 if sec > 0 else float("inf")


def _prime_factors(n: int) -> list:
    out, p = [], 2
    while p * p <= n:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def factor(n: int, naxes: int) -> tuple:
    """Split ``n`` into ``naxes`` per-axis process counts.

    Primes are handed out largest first to the axis with the smallest
    product so far. The final counts are sorted so that more significant
    axes get the larger factors.
    """
    counts = [1] * naxes
    for p in sorted(_prime_factors(n), reverse=True):
        i = min(range(naxes), key=lambda k: (counts[k], k))
        counts[i] *= p
    return tuple(sorted(counts, reverse=True))


def _split(length: int, parts: int, index: int) -> tuple:
    base, extra = divmod(length, parts)
    start = index * base + min(index, extra)
    return start, base + (1 if index < extra else 0)


def partition(shape, pattern: PartitionPattern, n: int) -> list:
    """``(start, count)`` of every rank's block, in rank order.

    Ranks are numbered row-major over the per-axis process grid. When an
    axis has more processes than elements, the surplus ranks get empty
    blocks.
    """
    if n < 1:
        raise ValueError("need at least one participant")
    pattern = PartitionPattern(pattern)
    axes = pattern.axes
    if max(axes) >= len(shape):
        raise ValueError(f"pattern {pattern.value} does not fit a rank-{len(shape)} array")
    grid = [1] * len(shape)
    for ax, c in zip(axes, factor(n, len(axes))):
        grid[ax] = c
    out = []
    for rank in range(n):
        coords, rem = [], rank
        for g in reversed(grid):
            coords.append(rem % g)
            rem //= g
        coords.reverse()
        start, count = [], []
        for length, g, c in zip(shape, grid, coords):
            s, k = _split(length, g, c)
            start.append(s)
            count.append(k)
        out.append((tuple(start), tuple(count)))
    return out


def coverage(shape, parts) -> np.ndarray:
    """Per-element ownership count; an exact tiling is all ones."""
    hits = np.zeros(shape, dtype=np.int32)
    for start, count in parts:
        hits[tuple(slice(s, s + c) for s, c in zip(start, count))] += 1
    return hits


def check_tiling(shape, parts) -> None:
    hits = coverage(shape, parts)
    if not np.all(hits == 1):
        raise ValueError(
            f"partition does not tile the array: {int((hits == 0).sum())} gaps, "
            f"{int((hits > 1).sum())} overlaps"
        )


def generate(shape, start, count, etype: ExternalType) -> np.ndarray:
    """Element (z,y,x) holds its global row-major index, cast to ``etype``."""
    idx = np.zeros((), dtype=np.int64)
    for s, c, st in zip(start, count, row_major_strides(shape)):
        idx = np.add.outer(idx, (s + np.arange(c, dtype=np.int64)) * st)
    return index_values(idx, etype)


def index_values(idx: np.ndarray, etype: ExternalType) -> np.ndarray:
    etype = ExternalType(etype)
    if etype == ExternalType.CHAR:
        return (idx % 256).astype(np.uint8).view("S1")
    mtype = MemoryType.for_external(etype)
    if mtype.dtype.kind == "i":
        bits = 8 * mtype.element_size
        half = 1 << (bits - 1)
        return ((idx + half) % (1 << bits) - half).astype(mtype.dtype)
    return idx.astype(mtype.dtype)


def file_digest(path) -> tuple:
    h = hashlib.sha256()
    size = 0
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
            size += len(chunk)
    return h.hexdigest(), size


class _Phases:
    """Rank-0 timing and op counting between barriers."""

    def __init__(self, group, op: str):
        self.group, self.op = group, op
        self.seconds, self.ops = {}, {}

    def run(self, name, fn, *args):
        self.group.barrier()
        before = self.group.stats.total(self.op)
        self.group.barrier()  # nobody starts before the baseline is read
        t0 = time.perf_counter()
        result = fn(*args)
        self.group.barrier()
        self.seconds[name] = time.perf_counter() - t0
        self.ops[name] = self.group.stats.total(self.op) - before
        return result


def bench_partition(shape, etype, pattern, n: int, mode: str, out, *,
                    aggregators: int | None = None, collective: bool = True,
                    timeout: float | None = None) -> BenchReport:
    """Write (or read back and verify) ``tt(Z,Y,X)`` partitioned by ``pattern``."""
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3 or min(shape) < 1:
        raise ValueError(f"shape must be three positive lengths, got {shape}")
    etype = ExternalType.from_name(etype) if isinstance(etype, str) else ExternalType(etype)
    pattern = PartitionPattern(pattern)
    if mode not in ("write", "read"):
        raise ValueError(f"mode must be 'write' or 'read', got {mode!r}")
    parts = partition(shape, pattern, n)
    check_tiling(shape, parts)
    hints = {"cb_nodes": str(aggregators)} if aggregators else {}
    op = "file_writes" if mode == "write" else "file_reads"

    def body(g):
        start, count = parts[g.rank]
        ph = _Phases(g, op)
        if mode == "write":
            def define():
                ds = ncds.create(g, out, hints)
                dims = [ds.def_dim(name, length) for name, length in zip("ZYX", shape)]
                ds.def_var("tt", etype, dims)
                ds.enddef()
                return ds
            ds = ph.run("define", define)
            data = generate(shape, start, count, etype)
            put = ds.put_vara_all if collective else ds.put_vara
            ph.run("write", put, 0, start, count, data)
            ph.run("close", ds.close)
            return ph, 0
        ds = ph.run("open", ncds.open, g, out, hints)
        get = ds.get_vara_all if collective else ds.get_vara
        got = ph.run("read", get, 0, start, count)
        ph.run("close", ds.close)
        expected = generate(shape, start, count, etype)
        return ph, int(np.count_nonzero(got != expected))

    results = _spawn(n, body, timeout)
    ph = results[0][0]
    digest, size = file_digest(out)
    esize = etype.element_size
    return BenchReport(
        pattern=pattern.value, n=n, shape=shape, etype=etype.cdl_name,
        total_bytes=math.prod(shape) * esize, file_bytes=size,
        data_bytes=math.prod(shape) * esize, digest=digest,
        seconds=ph.seconds, ops=ph.ops, mismatches=sum(m for _, m in results),
    )


def flash_layout(nblocks, nzb, nyb, nxb, nguard) -> MemoryLayout:
    """Memory runs of the block interiors inside a guard-cell-padded buffer."""
    padded = (nblocks, nzb + 2 * nguard, nyb + 2 * nguard, nxb + 2 * nguard)
    strides = row_major_strides(padded)
    base = nguard * (strides[1] + strides[2] + strides[3])
    offs = base + element_offsets((nblocks, nzb, nyb, nxb), strides)
    return MemoryLayout.from_element_offsets(offs, 8)


def flash_values(var_index, first_block, nblocks, nzb, nyb, nxb, total_blocks) -> np.ndarray:
    """Interior values of blocks ``[first_block, first_block + nblocks)`` of one variable."""
    per_var = total_blocks * nzb * nyb * nxb
    block = nzb * nyb * nxb
    idx = np.arange(first_block * block, (first_block + nblocks) * block, dtype=np.int64)
    return (var_index * per_var + idx).astype(np.float64).reshape(nblocks, nzb, nyb, nxb)


def bench_flash(nxb, nyb, nzb, nblocks, nvar, n: int, out, *, nguard: int = 0,
                serial: bool = False, aggregators: int | None = None,
                timeout: float | None = None) -> BenchReport:
    """FLASH-style checkpoint: ``nvar`` DOUBLE variables of shape (blocks, nzb, nyb, nxb).

    Rank ``r`` owns blocks ``[r*nblocks, (r+1)*nblocks)``. With ``serial``
    a single participant writes all ``nblocks*n`` blocks, which gives the
    reference file for the same global shape. A positive ``nguard`` keeps
    guard cells in the in-memory blocks and writes only the interiors,
    through the flexible API.
    """
    total_blocks = nblocks * n
    writers = 1 if serial else n
    per_writer = total_blocks // writers
    hints = {"cb_nodes": str(aggregators)} if aggregators else {}
    layout = flash_layout(per_writer, nzb, nyb, nxb, nguard) if nguard else None

    def body(g):
        ph = _Phases(g, "file_writes")

        def define():
            ds = ncds.create(g, out, hints)
            dims = [ds.def_dim(name, length) for name, length in
                    (("blocks", total_blocks), ("nzb", nzb), ("nyb", nyb), ("nxb", nxb))]
            for v in range(nvar):
                ds.def_var(f"var{v:02d}", ExternalType.DOUBLE, dims)
            ds.enddef()
            return ds

        ds = ph.run("define", define)
        first = g.rank * per_writer
        start, count = (first, 0, 0, 0), (per_writer, nzb, nyb, nxb)

        def write_all():
            for v in range(nvar):
                values = flash_values(v, first, per_writer, nzb, nyb, nxb, total_blocks)
                if layout is None:
                    ds.put_vara_all(v, start, count, values)
                else:
                    padded = np.full((per_writer, nzb + 2 * nguard, nyb + 2 * nguard,
                                      nxb + 2 * nguard), np.nan)
                    g0 = nguard
                    padded[:, g0:g0 + nzb, g0:g0 + nyb, g0:g0 + nxb] = values
                    ds.put_vara_all_flex(v, start, count, None, layout, MemoryType.DOUBLE, padded)

        ph.run("write", write_all)
        ph.run("close", ds.close)
        return ph, ds.schema.data_begin

    results = _spawn(writers, body, timeout)
    ph, data_begin = results[0]
    digest, size = file_digest(out)
    payload = total_blocks * nvar * nzb * nyb * nxb * 8
    return BenchReport(
        pattern=PartitionPattern.BLOCK.value, n=n, shape=(total_blocks, nzb, nyb, nxb),
        etype="double", total_bytes=payload, file_bytes=size, data_bytes=size - data_begin,
        digest=digest, seconds=ph.seconds, ops=ph.ops,
    )


def _spawn(n, body, timeout):
    from .engine import DEFAULT_TIMEOUT, spawn
    return spawn(n, body, timeout=timeout or DEFAULT_TIMEOUT)
