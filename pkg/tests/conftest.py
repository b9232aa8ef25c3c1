import numpy as np
import pytest
from hypothesis import strategies as st

from ecce_select import make_prediction_set

# coarse score grid on purpose: produces plenty of ties
grid_scores = st.integers(0, 20).map(lambda k: k / 20)
any_scores = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def prediction_sets(draw, max_n=60, scores=None):
    n = draw(st.integers(1, max_n))
    if scores is None:
        scores = st.one_of(grid_scores, any_scores)
    s = draw(st.lists(scores, min_size=n, max_size=n))
    y = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    return make_prediction_set(s, y)


@pytest.fixture
def worked_example():
    return make_prediction_set([0.1, 0.4, 0.6, 0.9], [0, 1, 0, 1])


def random_set(rng, n, tie_grid=None):
    s = rng.random(n)
    if tie_grid:
        s = np.round(s * tie_grid) / tie_grid
    return make_prediction_set(s, rng.integers(0, 2, n))


# -- acceptance reporting -----------------------------------------------------

_ACCEPTANCE: dict[int, str] = {}


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        line = f"criterion {self.number:2d} {status}: {self.title}"
        if self.detail:
            line += f" ({self.detail})"
        if exc_type is not None and exc_type is not AssertionError:
            line += f" [{exc_type.__name__}: {exc}]"
        _ACCEPTANCE[self.number] = line
        print(line)
        return False


@pytest.fixture
def criterion():
    """``with criterion(n, title) as c: ...`` records one PASS/FAIL line."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
