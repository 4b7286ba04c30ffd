import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lessnoisy.channels import BroadcastChannel, ChannelMatrix, binary_entropy, bsc

H01, H02, H03 = (binary_entropy(p) for p in (0.1, 0.2, 0.3))
C1, C2, C3 = 1 - H01, 1 - H02, 1 - H03


@pytest.fixture
def cascade():
    return BroadcastChannel((bsc(0.1), bsc(0.2), bsc(0.3)))


def random_channel(rng, nx, ny):
    e = rng.standard_exponential((nx, ny))
    return ChannelMatrix(e / e.sum(axis=1, keepdims=True))


def random_cascade(rng, nx=2, sizes=(2, 2, 2)):
    """Physically degraded chain ``X -> Y1 -> Y2 -> Y3``."""
    w = random_channel(rng, nx, sizes[0])
    out = [w]
    for a, b in zip(sizes, sizes[1:]):
        out.append(ChannelMatrix(out[-1].rows @ random_channel(rng, a, b).rows))
    return BroadcastChannel(tuple(out))


def _normalise(a):
    a = a + 1e-3
    return a / a.sum(axis=-1, keepdims=True)


@st.composite
def channels(draw, nx=None, ny=None):
    nx = nx or draw(st.integers(1, 4))
    ny = ny or draw(st.integers(1, 4))
    a = draw(arrays(np.float64, (nx, ny), elements=st.floats(0, 1)))
    return ChannelMatrix(_normalise(a))


@st.composite
def prob_vectors(draw, size):
    a = draw(arrays(np.float64, (size,), elements=st.floats(0, 1)))
    return _normalise(a)


# (criterion, passed, detail) lines recorded by test_acceptance.py
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
