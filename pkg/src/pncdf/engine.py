"""Participant groups and the collective I/O engine.

A ``Group`` is the in-process stand-in for an MPI communicator: ``spawn``
runs one thread per rank, and every collective primitive is a rendezvous
through shared slots. The engine detects two protocol violations without
timeouts: ranks calling different collectives at the same step, and a rank
leaving the group while others are still waiting on it.

Two-phase I/O follows the usual scheme. All ranks' extents are gathered,
the global byte range is cut into near-equal file domains, and each domain
is owned by one aggregator that performs all physical I/O for it.
"""
from __future__ import annotations

import bisect
import logging
import math
import os
import threading
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

from .access import Extent, merge_extents, union_extents
from .errors import (
    CollectiveMismatch,
    GroupAborted,
    IoError,
    LayoutMismatch,
    NCError,
)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 120.0
DEFAULT_MAX_AGGREGATORS = 4
DEFAULT_BUFFER_SIZE = 4 * 1024 * 1024


class Stats:
    """Thread-safe operation counters, keyed by (operation, rank)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counts = Counter()

    def incr(self, op: str, rank: int, n: int = 1) -> None:
        with self._lock:
            self._counts[op, rank] += n

    def total(self, op: str) -> int:
        with self._lock:
            return sum(v for (o, _), v in self._counts.items() if o == op)

    def by_rank(self, op: str) -> dict:
        with self._lock:
            return {r: v for (o, r), v in self._counts.items() if o == op}

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._counts)

    def reset(self) -> None:
        with self._lock:
            self._counts.clear()


class _Shared:
    def __init__(self, size: int, timeout: float):
        self.size = size
        self.timeout = timeout
        self.cond = threading.Condition()
        self.slots = [None] * size
        self.arrived = 0
        self.generation = 0
        self.result = None
        self.exited = set()
        self.failure = None
        self.stats = Stats()

    def fail(self, reason: str) -> None:
        with self.cond:
            if self.failure is None:
                self.failure = reason
            self.cond.notify_all()

    def leave(self, rank: int) -> None:
        with self.cond:
            self.exited.add(rank)
            self.cond.notify_all()

    def exchange(self, rank: int, item):
        with self.cond:
            if self.failure is not None:
                raise GroupAborted(f"rank {rank}: group aborted: {self.failure}")
            gen = self.generation
            self.slots[rank] = item
            self.arrived += 1
            if self.arrived == self.size:
                # counted under the lock so every rank returns after the increment
                self.stats.incr(self.slots[Group.root][0], Group.root)
                self.result = self.slots
                self.slots = [None] * self.size
                self.arrived = 0
                self.generation += 1
                self.cond.notify_all()
                return self.result
            while self.generation == gen:
                if self.failure is not None:
                    raise GroupAborted(f"rank {rank}: group aborted: {self.failure}")
                if self.exited:
                    reason = (
                        f"rank(s) {sorted(self.exited)} left the group while "
                        f"rank {rank} waits in a collective call"
                    )
                    self.failure = reason
                    self.cond.notify_all()
                    raise CollectiveMismatch(reason)
                if not self.cond.wait(self.timeout):
                    self.failure = f"collective timed out after {self.timeout}s"
                    self.cond.notify_all()
                    raise CollectiveMismatch(f"rank {rank}: {self.failure}")
            return self.result


class Group:
    """One rank's handle on a participant group."""

    root = 0

    def __init__(self, shared: _Shared, rank: int):
        self._shared = shared
        self.rank = rank
        self.size = shared.size

    def __repr__(self):
        return f"Group(rank={self.rank}, size={self.size})"

    @property
    def stats(self) -> Stats:
        return self._shared.stats

    @property
    def is_root(self) -> bool:
        return self.rank == self.root

    def _collective(self, op: str, item):
        items = self._shared.exchange(self.rank, (op, item))
        ops = {o for o, _ in items}
        if len(ops) > 1:
            seq = ", ".join(f"{r}:{o}" for r, (o, _) in enumerate(items))
            raise CollectiveMismatch(f"ranks called different collectives ({seq})")
        return [x for _, x in items]

    def barrier(self) -> None:
        self._collective("barrier", None)

    def broadcast(self, obj=None):
        """Return the root's ``obj`` on every rank."""
        return self._collective("broadcast", obj if self.is_root else None)[self.root]

    def all_match(self, digest: bytes) -> bool:
        """True on every rank iff all ranks passed byte-identical digests."""
        items = self._collective("all_match", bytes(digest))
        return all(d == items[0] for d in items)

    def all_gather(self, item) -> list:
        """Every rank's ``item``, in rank order, on every rank."""
        return self._collective("all_gather", item)


def spawn(n: int, body, *args, timeout: float = DEFAULT_TIMEOUT) -> list:
    """Run ``body(group, *args)`` on ``n`` ranks; return results in rank order.

    If any rank raises, the group is aborted and the originating exception
    (lowest rank first, ignoring ranks that were merely stranded) is
    re-raised with a ``rank`` attribute.
    """
    if n < 1:
        raise ValueError("a group needs at least one participant")
    shared = _Shared(n, timeout)
    results = [None] * n
    errors = [None] * n

    def run(rank):
        try:
            results[rank] = body(Group(shared, rank), *args)
        except BaseException as e:  # noqa: BLE001 - re-raised in the caller
            errors[rank] = e
            shared.fail(f"rank {rank} raised {type(e).__name__}: {e}")
        finally:
            shared.leave(rank)

    threads = [threading.Thread(target=run, args=(r,), name=f"rank-{r}") for r in range(n)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    failed = [(r, e) for r, e in enumerate(errors) if e is not None]
    if failed:
        primary = [(r, e) for r, e in failed if not isinstance(e, GroupAborted)] or failed
        rank, exc = primary[0]
        exc.rank = rank
        raise exc
    return results


def agree(group: Group, error: BaseException | None) -> None:
    """Collective error agreement: if any rank failed, raise on every rank.

    The failing rank re-raises its own exception; the others raise a copy of
    the lowest failing rank's error type carrying its message.
    """
    statuses = group.all_gather(None if error is None else (type(error), str(error)))
    if error is not None:
        raise error
    for rank, st in enumerate(statuses):
        if st is not None:
            cls, msg = st
            if not (isinstance(cls, type) and issubclass(cls, NCError)):
                cls = IoError
            raise cls(f"rank {rank}: {msg}")


# --- files ----------------------------------------------------------------

class SharedFile:
    """Positioned reads and writes on one rank's descriptor, with op counting."""

    def __init__(self, path, stats: Stats, rank: int, *, writable=True, create=False,
                 exclusive=False):
        flags = os.O_RDWR if writable else os.O_RDONLY
        if create:
            flags |= os.O_CREAT | (os.O_EXCL if exclusive else os.O_TRUNC)
        self.path = os.fspath(path)
        self.fd = os.open(self.path, flags, 0o644)
        self.stats = stats
        self.rank = rank

    def pread(self, offset: int, length: int, *, kind: str = "file") -> bytes:
        self.stats.incr(f"{kind}_reads", self.rank)
        self.stats.incr("bytes_read", self.rank, length)
        try:
            data = os.pread(self.fd, length, offset)
        except OSError as e:
            raise IoError(f"read of {length} bytes at {offset} failed: {e}") from e
        if len(data) < length:
            data += b"\x00" * (length - len(data))
        return data

    def pwrite(self, offset: int, data, *, kind: str = "file") -> int:
        self.stats.incr(f"{kind}_writes", self.rank)
        self.stats.incr("bytes_written", self.rank, len(data))
        view = memoryview(data)
        done = 0
        try:
            while done < len(view):
                done += os.pwrite(self.fd, view[done:], offset + done)
        except OSError as e:
            raise IoError(f"write of {len(view)} bytes at {offset} failed: {e}") from e
        return done

    def size(self) -> int:
        return os.fstat(self.fd).st_size

    def flush(self) -> None:
        os.fsync(self.fd)

    def close(self) -> None:
        if self.fd is not None:
            os.close(self.fd)
            self.fd = None


# --- hints ----------------------------------------------------------------

class HintSet(dict):
    """String hints. Unknown keys are kept and ignored.

    Recognized keys: ``cb_nodes`` (aggregator count), ``cb_buffer_size``
    (aggregator staging bytes) and ``record_batch`` (reserved).
    """

    def _int(self, key, default):
        raw = self.get(key)
        if raw is None:
            return default
        try:
            value = int(raw)
        except (TypeError, ValueError):
            log.warning("ignoring hint %s=%r: not an integer", key, raw)
            return default
        if value < 1:
            log.warning("ignoring hint %s=%r: must be positive", key, raw)
            return default
        return value

    def aggregators(self, nprocs: int) -> int:
        return min(self._int("cb_nodes", min(nprocs, DEFAULT_MAX_AGGREGATORS)), nprocs)

    @property
    def buffer_size(self) -> int:
        return self._int("cb_buffer_size", DEFAULT_BUFFER_SIZE)

    @property
    def record_batch(self) -> list:
        raw = self.get("record_batch", "")
        return [int(x) for x in str(raw).split(",") if x.strip()]


# --- two-phase planning ---------------------------------------------------

class Exchange(NamedTuple):
    source: int
    aggregator: int
    offset: int
    length: int
    buffer_offset: int


@dataclass(frozen=True)
class Domain:
    lo: int
    hi: int
    aggregator: int


@dataclass(frozen=True)
class IoPlan:
    extents: tuple
    domains: tuple
    schedule: tuple
    buffer_size: int
    for_write: bool

    def for_aggregator(self, rank: int) -> list:
        return [(k, d) for k, d in enumerate(self.domains) if d.aggregator == rank]


def build_plan(all_extents, nprocs: int, hints: HintSet | None = None, *,
               for_write: bool = True) -> IoPlan:
    """Deterministic two-phase plan from every rank's extents."""
    hints = HintSet(hints or {})
    all_extents = tuple(tuple(Extent(*e) for e in ext) for ext in all_extents)
    if for_write:
        merge_extents(e for ext in all_extents for e in ext)
    nonempty = [e for ext in all_extents for e in ext if e.length > 0]
    if not nonempty:
        return IoPlan(all_extents, (), (), hints.buffer_size, for_write)
    lo = min(e.offset for e in nonempty)
    hi = max(e.offset + e.length for e in nonempty)
    naggr = hints.aggregators(nprocs)
    dsize = max(4, (math.ceil((hi - lo) / naggr) + 3) // 4 * 4)
    # Domain boundaries snap to the nearest extent edge so no requested
    # extent is cut in two; aggregation then never adds file operations.
    edges = sorted({e.offset for e in nonempty} | {e.offset + e.length for e in nonempty})
    bounds = [lo]
    for k in range(1, naggr):
        target = min(lo + k * dsize, hi)
        i = bisect.bisect_left(edges, target)
        near = [edges[j] for j in (i - 1, i) if 0 <= j < len(edges)]
        bounds.append(max(bounds[-1], min(near, key=lambda x: (abs(x - target), x))))
    bounds.append(hi)
    domains = [
        Domain(bounds[k], bounds[k + 1], k * nprocs // naggr)
        for k in range(naggr) if bounds[k] < bounds[k + 1]
    ]
    starts = [d.lo for d in domains]

    schedule = []
    for src, ext in enumerate(all_extents):
        cursor = 0
        for off, n in ext:
            end = off + n
            while off < end:
                k = bisect.bisect_right(starts, off) - 1
                cut = min(end, domains[k].hi)
                schedule.append(Exchange(src, domains[k].aggregator, off, cut - off, cursor))
                cursor += cut - off
                off = cut
    return IoPlan(all_extents, tuple(domains), tuple(schedule), hints.buffer_size, for_write)


def plan_two_phase(group: Group, extents, hints: HintSet | None = None, *,
                   for_write: bool = True) -> IoPlan:
    """Collective: gather every rank's extents and build the shared plan."""
    gathered = group.all_gather(tuple(extents))
    # Every rank plans from the same gathered input, so an OverlapError is
    # raised uniformly without a further exchange.
    return build_plan(gathered, group.size, hints, for_write=for_write)


def _windows(domain: Domain, bufsize: int):
    w = domain.lo
    while w < domain.hi:
        yield w, min(w + bufsize, domain.hi)
        w += bufsize


def _clip(pieces, w_lo, w_hi):
    """Pieces (offset, length, payload-or-key) restricted to [w_lo, w_hi)."""
    for off, n, item in pieces:
        a, b = max(off, w_lo), min(off + n, w_hi)
        if a < b:
            yield a, b - a, off, item


def collective_write(group: Group, file: SharedFile, plan: IoPlan, buffer) -> int:
    """Two-phase write of this rank's packed file-order ``buffer``; returns its byte count."""
    mine = plan.extents[group.rank]
    need = sum(n for _, n in mine)
    view = memoryview(buffer).cast("B")
    if len(view) != need:
        raise LayoutMismatch(f"buffer holds {len(view)} bytes, extents need {need}")
    outgoing = {}
    for x in plan.schedule:
        if x.source == group.rank:
            outgoing.setdefault(x.aggregator, []).append(
                (x.offset, x.length, view[x.buffer_offset:x.buffer_offset + x.length])
            )
    inbox = group.all_gather(outgoing)

    error = None
    try:
        for _, dom in plan.for_aggregator(group.rank):
            pieces = sorted(
                (off, n, data)
                for sent in inbox
                for off, n, data in sent.get(group.rank, ())
                if off < dom.hi and off + n > dom.lo
            )
            for w_lo, w_hi in _windows(dom, plan.buffer_size):
                stage = bytearray(w_hi - w_lo)
                covered = []
                for a, n, off, data in _clip(pieces, w_lo, w_hi):
                    stage[a - w_lo:a - w_lo + n] = data[a - off:a - off + n]
                    covered.append((a, n))
                for off, n in merge_extents(covered):
                    file.pwrite(off, memoryview(stage)[off - w_lo:off - w_lo + n])
    except NCError as e:
        error = e
    agree(group, error)
    return need


def collective_read(group: Group, file: SharedFile, plan: IoPlan) -> bytes:
    """Two-phase read; returns this rank's bytes packed in file order."""
    error = None
    outgoing = {}
    try:
        for _, dom in plan.for_aggregator(group.rank):
            pieces = [
                (x.offset, x.length, (x.source, x.buffer_offset))
                for x in plan.schedule
                if x.aggregator == group.rank and dom.lo <= x.offset < dom.hi
            ]
            for w_lo, w_hi in _windows(dom, plan.buffer_size):
                clipped = list(_clip(pieces, w_lo, w_hi))
                runs = union_extents((a, n) for a, n, _, _ in clipped)
                data = {off: file.pread(off, n) for off, n in runs}
                starts = sorted(data)
                for a, n, off, (src, boff) in clipped:
                    # the run containing ``a`` is the last run starting at or before it
                    r = starts[_bisect(starts, a)]
                    chunk = data[r][a - r:a - r + n]
                    outgoing.setdefault(src, []).append((boff + a - off, chunk))
    except NCError as e:
        error = e
    inbox = group.all_gather(outgoing)
    agree(group, error)
    out = bytearray(sum(n for _, n in plan.extents[group.rank]))
    for sent in inbox:
        for boff, chunk in sent.get(group.rank, ()):
            out[boff:boff + len(chunk)] = chunk
    return bytes(out)


def _bisect(starts, x):
    return bisect.bisect_right(starts, x) - 1


def independent_write(file: SharedFile, extents, buffer) -> int:
    """One positioned write per extent, consuming ``buffer`` in order."""
    view = memoryview(buffer).cast("B")
    need = sum(n for _, n in extents)
    if len(view) != need:
        raise LayoutMismatch(f"buffer holds {len(view)} bytes, extents need {need}")
    pos = 0
    for off, n in extents:
        file.pwrite(off, view[pos:pos + n])
        pos += n
    return need


def independent_read(file: SharedFile, extents) -> bytes:
    return b"".join(file.pread(off, n) for off, n in extents)
