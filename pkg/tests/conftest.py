import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from bdsched.model import Packet  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def pending_sets(draw, max_size=12, t=0, max_life=10, integer_weights=False):
    size = draw(st.integers(1, max_size))
    out = []
    for i in range(size):
        if integer_weights:
            w = float(draw(st.integers(1, 6)))
        else:
            w = draw(st.floats(0.01, 100.0, allow_nan=False, allow_infinity=False))
        d = t + draw(st.integers(1, max_life))
        out.append(Packet(w, t, d, i))
    return out


def random_pending(rng, size, t=0, max_life=20, distinct_weights=None):
    if distinct_weights:
        pool = rng.uniform(0.5, 50.0, size=distinct_weights)
        ws = rng.choice(pool, size=size)
    else:
        ws = rng.uniform(0.01, 100.0, size=size)
    ds = rng.integers(t + 1, t + max_life + 1, size=size)
    return [Packet(float(w), t, int(d), i) for i, (w, d) in enumerate(zip(ws, ds))]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[k])
