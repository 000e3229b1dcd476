import numpy as np
import pytest

from riskpg import Discounted, random_mdp

_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture
def small_discounted():
    return random_mdp(7, 4, 2, Discounted(0.9))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def verdict(request):
    """Record one acceptance line; printed together at the end of the session."""
    table = request.config.stash.setdefault(_VERDICTS, {})

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        table[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    table = config.stash.get(_VERDICTS, {})
    if table:
        terminalreporter.section("acceptance")
        for number in sorted(table):
            terminalreporter.write_line(table[number])
