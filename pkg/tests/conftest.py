import numpy as np
import pytest
from hypothesis import strategies as st

from lipext.field import OneField
from lipext.verification import e1_fixture, two_circles_fixture

SQRT3 = np.sqrt(3.0)


def random_field(seed, m=None, n=2, spread=1.0):
    rng = np.random.default_rng(seed)
    if m is None:
        m = int(rng.integers(2, 6))
    return OneField(spread * rng.normal(size=(m, n)), rng.normal(size=m), rng.normal(size=(m, n)))


@st.composite
def fields(draw, min_m=2, max_m=5, n=2):
    seed = draw(st.integers(0, 2**32 - 1))
    m = draw(st.integers(min_m, max_m))
    return random_field(seed, m, n)


@pytest.fixture(scope="session")
def e1():
    return e1_fixture()


@pytest.fixture(scope="session")
def circles360():
    return two_circles_fixture(360)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
