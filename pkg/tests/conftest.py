import pytest

from qscatter.model import DEFAULT_PARAMS, Family
from qscatter.numerics import QuadratureSpec
from qscatter.observables import make_field


@pytest.fixture(scope="session")
def params():
    return DEFAULT_PARAMS


@pytest.fixture(scope="session")
def fields():
    q = QuadratureSpec()
    return {f.value: make_field(f, DEFAULT_PARAMS, q) for f in Family}


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
        terminalreporter.write_line(line)
