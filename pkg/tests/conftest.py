from fractions import Fraction

import pytest
from hypothesis import strategies as st

from carnot_kit.catalog import builtin

ACCEPTANCE_BUILTINS = (
    [f"abelian:{m}" for m in range(1, 5)]
    + ["heis", "engel"]
    + [f"filiform1:{s}" for s in range(2, 8)]
    + ["filiform2:5", "filiform2:7", "free:2,2", "free:2,3", "free:3,2", "cartan"]
)

small_rationals = st.fractions(min_value=-3, max_value=3, max_denominator=6)


def rational_points(alg, size=None):
    return st.lists(small_rationals, min_size=alg.n, max_size=alg.n).map(alg.element)


@pytest.fixture(scope="session")
def engel():
    return builtin("engel")


@pytest.fixture(scope="session")
def heis():
    return builtin("heis")


def frac_matrix(rows):
    return [[Fraction(v) for v in row] for row in rows]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
