import random

import numpy as np
import pytest
from hypothesis import strategies as st

from pncdf.access import AccessRequest
from pncdf.format import Attribute, Dimension, ExternalType, Schema, Variable, compute_layout

# Short timeout: a protocol bug should fail fast instead of hanging the suite.
TEST_TIMEOUT = 20.0

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _CRITERIA.append((marker.args[0], marker.args[1], rep.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n, text, outcome in sorted(_CRITERIA, key=lambda c: (c[0], c[1])):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[outcome]
        terminalreporter.write_line(f"criterion {n}: {status} - {text}")


# --- schema strategies ----------------------------------------------------

# A fixed alphabet keeps generation cheap while still covering multi-byte
# UTF-8, punctuation and digits.
_NAME_CHARS = "abcxyzABZ_019 .-+@" + "\u00e9\u03bb\u4e2d\U0001f600"
names = st.text(alphabet=_NAME_CHARS, min_size=1, max_size=10)


def _int_range(etype):
    bits = 8 * etype.element_size
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


_VALUES = {
    ExternalType.CHAR: st.binary(max_size=13),
    ExternalType.FLOAT: st.lists(st.floats(width=32, allow_nan=False), max_size=6),
    ExternalType.DOUBLE: st.lists(st.floats(allow_nan=False), max_size=6),
    **{t: st.lists(st.integers(*_int_range(t)), max_size=6)
       for t in (ExternalType.BYTE, ExternalType.SHORT, ExternalType.INT)},
}
_TYPES = st.sampled_from(list(ExternalType))


def attribute_values(etype):
    return _VALUES[etype]


@st.composite
def attribute_lists(draw, max_size=4):
    anames = draw(st.lists(names, unique=True, max_size=max_size))
    out = []
    for name in anames:
        etype = draw(_TYPES)
        out.append(Attribute(name, etype, draw(_VALUES[etype])))
    return out


@st.composite
def schemas(draw, max_dims=8, max_vars=16, max_len=20, max_rank=4):
    """Valid schemas with layout computed."""
    ndims = draw(st.integers(0, max_dims))
    dnames = draw(st.lists(names, unique=True, min_size=ndims, max_size=ndims))
    unlimited = draw(st.booleans()) and ndims > 0
    unlim_pos = draw(st.integers(0, ndims - 1)) if unlimited else None
    dims = [
        Dimension(n, 0, True) if i == unlim_pos else Dimension(n, draw(st.integers(1, max_len)))
        for i, n in enumerate(dnames)
    ]
    fixed_ids = [i for i in range(ndims) if i != unlim_pos]
    nvars = draw(st.integers(0, max_vars))
    vnames = draw(st.lists(names, unique=True, min_size=nvars, max_size=nvars))
    variables = []
    for i, name in enumerate(vnames):
        rank = draw(st.integers(0, min(max_rank, len(fixed_ids))))
        dim_ids = draw(st.lists(st.sampled_from(fixed_ids), min_size=rank, max_size=rank)) \
            if fixed_ids else []
        if unlim_pos is not None and draw(st.booleans()):
            dim_ids = [unlim_pos] + dim_ids[: max_rank - 1]
        etype = draw(_TYPES)
        variables.append(Variable(name, etype, dim_ids, draw(attribute_lists(3)), var_id=i))
    numrecs = draw(st.integers(0, 1000)) if unlimited else 0
    schema = Schema(dims, draw(attribute_lists()), variables, numrecs)
    pad = draw(st.integers(0, 64)) if variables else 0
    return compute_layout(schema, pad)


def random_schema(rng, max_dims=8, max_vars=16, max_len=20, max_rank=4):
    """Seed-driven counterpart of ``schemas``: same space, far cheaper to draw."""
    def name():
        return "".join(rng.choice(_NAME_CHARS) for _ in range(rng.randint(1, 10)))

    def unique_names(k):
        out = []
        while len(out) < k:
            n = name()
            if n not in out:
                out.append(n)
        return out

    def values(etype):
        if etype == ExternalType.CHAR:
            return rng.randbytes(rng.randint(0, 13))
        k = rng.randint(0, 6)
        if etype == ExternalType.FLOAT:
            return [float(np.float32(rng.uniform(-3e38, 3e38))) for _ in range(k)]
        if etype == ExternalType.DOUBLE:
            return [rng.choice([rng.uniform(-1e308, 1e308), rng.random(), 0.0, -0.0])
                    for _ in range(k)]
        return [rng.randint(*_int_range(etype)) for _ in range(k)]

    def atts(k):
        return [Attribute(n, t, values(t))
                for n in unique_names(rng.randint(0, k))
                for t in [rng.choice(list(ExternalType))]]

    ndims = rng.randint(0, max_dims)
    unlim_pos = rng.randrange(ndims) if ndims and rng.random() < 0.5 else None
    dims = [Dimension(n, 0, True) if i == unlim_pos else Dimension(n, rng.randint(1, max_len))
            for i, n in enumerate(unique_names(ndims))]
    fixed_ids = [i for i in range(ndims) if i != unlim_pos]
    variables = []
    for i, n in enumerate(unique_names(rng.randint(0, max_vars))):
        rank = rng.randint(0, min(max_rank, len(fixed_ids)))
        dim_ids = [rng.choice(fixed_ids) for _ in range(rank)]
        if unlim_pos is not None and rng.random() < 0.5:
            dim_ids = [unlim_pos] + dim_ids[: max_rank - 1]
        variables.append(Variable(n, rng.choice(list(ExternalType)), dim_ids, atts(3), var_id=i))
    numrecs = rng.randint(0, 1000) if unlim_pos is not None else 0
    pad = rng.randint(0, 64) if variables else 0
    return compute_layout(Schema(dims, atts(4), variables, numrecs), pad)


seeded_schemas = st.integers(0, 2**63).map(lambda seed: random_schema(random.Random(seed)))


def _request_schema(dims, variables, numrecs):
    return compute_layout(Schema(
        [Dimension(n, length, length == 0) for n, length in dims], [],
        [Variable(name, t, ids, var_id=i) for i, (name, t, ids) in enumerate(variables)],
        numrecs,
    ))


@st.composite
def requests(draw, max_rank=4, max_len=5):
    """A variable of rank <= max_rank (dims <= max_len) plus a strided selection of it."""
    rank = draw(st.integers(0, max_rank))
    record = rank > 0 and draw(st.booleans())
    lengths = [draw(st.integers(1, max_len)) for _ in range(rank)]
    etype = draw(st.sampled_from(list(ExternalType)))
    dims = [("U", 0)] if record else []
    dims += [(f"d{i}", n) for i, n in enumerate(lengths[1:] if record else lengths)]
    first = 1 if record else 0
    ids = tuple(range(rank))
    others = [("pad", ExternalType.SHORT, ids[first:])] if record and draw(st.booleans()) else []
    numrecs = lengths[0] if record else 0
    variables = [("fill", ExternalType.BYTE, ()), ("v", etype, ids)] + others
    schema = _request_schema(dims, variables, numrecs)
    start, count, stride = [], [], []
    for n in lengths:
        st_ = draw(st.integers(1, 3))
        s = draw(st.integers(0, n - 1))
        c = draw(st.integers(0, (n - 1 - s) // st_ + 1))
        start.append(s)
        count.append(c)
        stride.append(st_)
    return schema, AccessRequest(1, start, count, stride)


@pytest.fixture
def run_group():
    """Spawn a group with the test timeout."""
    from pncdf import spawn

    def run(n, body, *args):
        return spawn(n, body, *args, timeout=TEST_TIMEOUT)

    return run
