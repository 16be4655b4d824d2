import pytest

from circle_renorm.maps import arnold_bicritical, perturbed_family
from circle_renorm.partitions import CircleDynamics
from circle_renorm.rotation import tune_parameter

PREC = 512
GOLDEN = [1] * 12
THIRTY = [1, 1, 1, 30] + [1] * 8


@pytest.fixture(scope="session")
def golden_map():
    return tune_parameter(lambda a: arnold_bicritical(a, PREC), GOLDEN).map


@pytest.fixture(scope="session")
def thirty_map():
    return tune_parameter(lambda a: arnold_bicritical(a, PREC), THIRTY).map


@pytest.fixture(scope="session")
def perturbed_golden_map():
    return tune_parameter(lambda a: perturbed_family(a, ["0.01"], PREC), GOLDEN).map


@pytest.fixture(scope="session")
def golden_dyn(golden_map):
    return CircleDynamics(golden_map, 12)


@pytest.fixture(scope="session")
def thirty_dyn(thirty_map):
    return CircleDynamics(thirty_map, 12)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, in criterion order."""
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(verdicts):
        title, ok, detail = verdicts[k]
        terminalreporter.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
