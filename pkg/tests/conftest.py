from fractions import Fraction

import pytest

from mfdecomp.examples import bernoulli_pisot_simple, cantor_overlap, testud
from mfdecomp.graph import build_graph
from mfdecomp.loops import analyse_classes

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def golden():
    g = build_graph(bernoulli_pisot_simple(2, Fraction(1, 2)))
    classes, decomp = analyse_classes(g)
    return g, classes, decomp


@pytest.fixture(scope="session")
def cantor():
    g = build_graph(cantor_overlap())
    classes, decomp = analyse_classes(g)
    return g, classes, decomp


@pytest.fixture(scope="session")
def testud_graph():
    probs = {"0,+1": Fraction(1, 8), "1,+1": Fraction(5, 16), "2,+1": Fraction(3, 16), "1,-1": Fraction(3, 8)}
    g = build_graph(testud(3, [0, 1, 2], [1], probs))
    classes, decomp = analyse_classes(g)
    return g, classes, decomp
