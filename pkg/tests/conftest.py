import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from goqsm.channel import build_channel, reference_geometry, reference_params  # noqa: E402


@pytest.fixture(scope="session")
def reference_channel():
    return build_channel(reference_params(), reference_geometry())


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[tuple[int, str]] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
