from fractions import Fraction

import pytest

from superhedging.market import Claim, MarketModel, build_tree
from superhedging.solvency import ExchangeMatrix, build_cone

F = Fraction


@pytest.fixture(scope="session")
def spec10():
    """d = 2, both costs 1/10."""
    return build_cone(ExchangeMatrix.constant(2, F(1, 10)))


@pytest.fixture(scope="session")
def model2():
    return MarketModel.constant((1.0, 1.0), 0.0, [0.0], [[0.0], [0.2]], 1.0)


@pytest.fixture(scope="session")
def tree1(model2):
    return build_tree(model2, 1)


@pytest.fixture(scope="session")
def tree2(model2):
    return build_tree(model2, 2)


@pytest.fixture(scope="session")
def unit_claim():
    return Claim("constant-physical", vector=(F(1), F(0)))


@pytest.fixture(scope="session")
def call2():
    return Claim("vanilla-call", asset=2, strike=F(1))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
