import numpy as np
import pytest

from exchange_index import corpus
from exchange_index.equilibrium import find_all_equilibria


@pytest.fixture(scope="session")
def e1():
    return corpus.e1()


@pytest.fixture(scope="session")
def e2():
    return corpus.e2()


@pytest.fixture(scope="session")
def e2_equilibria(e2):
    recs = find_all_equilibria(e2.eco, e2.omega)
    assert len(recs) == 3
    return recs


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
