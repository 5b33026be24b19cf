import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sessionck.generators import corpus  # noqa: E402


@pytest.fixture(scope="session")
def cp():
    return corpus()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
