import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import requests
from oracles import brute_force_extents, memory_offsets
from pncdf.access import (
    AccessRequest,
    Extent,
    MemoryLayout,
    flatten_file,
    flatten_memory,
    merge_extents,
    union_extents,
)
from pncdf.codec import MemoryType
from pncdf.errors import BadId, OutOfBounds, OverlapError, RankMismatch
from pncdf.format import Dimension, ExternalType, Schema, Variable, compute_layout

D = ExternalType.DOUBLE


def _schema(dims, variables, numrecs=0):
    return compute_layout(Schema(
        [Dimension(n, length, length == 0) for n, length in dims], [],
        [Variable(name, t, ids, var_id=i) for i, (name, t, ids) in enumerate(variables)],
        numrecs,
    ))


@pytest.fixture
def tt():
    return _schema([("Z", 2), ("Y", 3), ("X", 4)], [("tt", D, (0, 1, 2))])


def test_whole_array_single_extent(tt):
    b = tt.variables[0].begin
    assert flatten_file(tt, AccessRequest(0, (0, 0, 0), (2, 3, 4))) == [Extent(b, 192)]


def test_subarray(tt):
    b = tt.variables[0].begin
    req = AccessRequest(0, (0, 1, 0), (2, 2, 4))
    expected = [(b + 32, 64), (b + 128, 64)]
    assert brute_force_extents(tt, tt.variables[0], req.start, req.count, req.strides) == expected
    assert flatten_file(tt, req) == expected


def test_strided():
    s = _schema([("Y", 4), ("X", 4)], [("v", D, (0, 1))])
    b = s.variables[0].begin
    req = AccessRequest(0, (0, 1), (4, 2), (1, 2))
    expected = [(b + off, 8) for off in (8, 24, 40, 56, 72, 88, 104, 120)]
    assert brute_force_extents(s, s.variables[0], req.start, req.count, req.stride) == expected
    assert flatten_file(s, req) == expected


def test_record_variable():
    s = _schema([("U", 0), ("X2", 2), ("X3", 3)], [("r", D, (0, 1)), ("r2", D, (0, 2))],
                numrecs=3)
    assert s.recsize == 40
    b = s.variables[0].begin
    req = AccessRequest(0, (1, 0), (2, 2))
    assert flatten_file(s, req) == [(b + 40, 16), (b + 80, 16)]


def test_single_record_variable_merges_across_records():
    s = _schema([("U", 0), ("X", 3)], [("r", D, (0, 1))], numrecs=4)
    b = s.variables[0].begin
    assert flatten_file(s, AccessRequest(0, (0, 0), (4, 3))) == [(b, 96)]


def test_record_bounds_read_vs_write():
    s = _schema([("U", 0), ("X", 2)], [("r", D, (0, 1))], numrecs=2)
    with pytest.raises(OutOfBounds):
        flatten_file(s, AccessRequest(0, (2, 0), (1, 2)))
    assert flatten_file(s, AccessRequest(0, (5, 0), (1, 2)), for_write=True)


def test_scalar_variable():
    s = _schema([], [("c", ExternalType.SHORT, ())])
    assert flatten_file(s, AccessRequest(0, (), ())) == [(s.variables[0].begin, 2)]


def test_zero_count_is_empty(tt):
    assert flatten_file(tt, AccessRequest(0, (0, 0, 0), (0, 3, 4))) == []
    assert flatten_file(tt, AccessRequest(0, (2, 0, 0), (0, 3, 4))) == []


@pytest.mark.parametrize("req,exc", [
    (AccessRequest(0, (0, 0), (1, 1)), RankMismatch),
    (AccessRequest(0, (0, 0, 4), (1, 1, 1)), OutOfBounds),
    (AccessRequest(0, (0, 0, 0), (1, 1, 3), (1, 1, 2)), OutOfBounds),
    (AccessRequest(0, (0, 0, 0), (1, 1, 1), (1, 1, 0)), OutOfBounds),
    (AccessRequest(0, (-1, 0, 0), (1, 1, 1)), OutOfBounds),
    (AccessRequest(3, (0, 0, 0), (1, 1, 1)), BadId),
])
def test_request_errors(tt, req, exc):
    with pytest.raises(exc):
        flatten_file(tt, req)


def test_memory_identity(tt):
    layout = flatten_memory(tt, AccessRequest(0, (0, 0, 0), (2, 3, 4)), MemoryType.DOUBLE)
    assert layout.runs == ((0, 192),)
    assert layout.total_bytes == 192


def test_memory_transpose():
    s = _schema([("A", 2), ("B", 3)], [("v", D, (0, 1))])
    layout = flatten_memory(s, AccessRequest(0, (0, 0), (2, 3), imap=(1, 2)), MemoryType.DOUBLE)
    assert [o for o, _ in layout.runs] == [0, 16, 32, 8, 24, 40]
    assert [o * 8 for o in memory_offsets((2, 3), (1, 2))] == [0, 16, 32, 8, 24, 40]
    assert all(n == 8 for _, n in layout.runs)


def test_memory_overlap_on_write():
    s = _schema([("A", 2), ("B", 3)], [("v", D, (0, 1))])
    req = AccessRequest(0, (0, 0), (2, 3), imap=(1, 1))
    with pytest.raises(OverlapError):
        flatten_memory(s, req, MemoryType.DOUBLE, for_write=True)
    flatten_memory(s, req, MemoryType.DOUBLE)  # reads may gather duplicates


def test_negative_imap_rejected():
    s = _schema([("A", 2)], [("v", D, (0,))])
    with pytest.raises(OutOfBounds):
        flatten_memory(s, AccessRequest(0, (0,), (2,), imap=(-1,)), MemoryType.DOUBLE)


def test_merge_examples():
    assert merge_extents([(0, 4), (4, 4)]) == [(0, 8)]
    assert merge_extents([(8, 4), (0, 4)]) == [(0, 4), (8, 4)]
    with pytest.raises(OverlapError):
        merge_extents([(0, 8), (4, 8)])
    assert union_extents([(0, 8), (4, 8), (20, 1)]) == [(0, 12), (20, 1)]


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(1, 5)), max_size=20))
def test_merge_conserves_bytes(pieces):
    # make pieces disjoint by spacing them out
    disjoint, pos = [], 0
    for gap, n in pieces:
        pos += gap % 3
        disjoint.append((pos, n))
        pos += n
    merged = merge_extents(reversed(disjoint))
    assert sum(n for _, n in merged) == sum(n for _, n in disjoint)
    for (a, n), (b, _) in zip(merged, merged[1:]):
        assert a + n < b


@settings(max_examples=500, deadline=None)
@given(requests())
def test_flatten_matches_enumeration(case):
    schema, req = case
    var = schema.variables[1]
    got = flatten_file(schema, req)
    assert got == brute_force_extents(schema, var, req.start, req.count, req.strides)
    assert sum(n for _, n in got) == req.nelems * var.type.element_size
    layout = flatten_memory(schema, req, MemoryType.for_external(var.type))
    assert layout.total_bytes == sum(n for _, n in got)
    assert layout == MemoryLayout.contiguous(layout.total_bytes)
