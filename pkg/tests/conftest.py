import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lacksim.duration_models import EmpiricalPiecewiseModel, table1_models  # noqa: E402


@pytest.fixture(scope="session")
def empirical():
    return EmpiricalPiecewiseModel()


@pytest.fixture(scope="session")
def all_models(empirical):
    return table1_models() + [empirical]


# acceptance criteria append (label, passed, detail) here
ACCEPTANCE_REPORT = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(ACCEPTANCE_REPORT, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
