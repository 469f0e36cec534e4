import json
from pathlib import Path

import pytest

from cmskit.system import builtin

ORACLES = json.loads((Path(__file__).parent / "oracles.json").read_text())
P_TWO = [[0.7, 0.3], [0.4, 0.6]]


@pytest.fixture(scope="session")
def oracles():
    return ORACLES


@pytest.fixture(scope="session")
def r1():
    return builtin("example_r1")


@pytest.fixture(scope="session")
def r2():
    return builtin("example_r2")


@pytest.fixture(scope="session")
def gm():
    return builtin("gmarkov", P_TWO)


@pytest.fixture(scope="session")
def builtins(r1, r2, gm):
    return {"example_r1": r1, "example_r2": r2, "gmarkov": gm}


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
