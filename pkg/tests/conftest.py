"""Shared fixtures: small problems and datasets reused across test modules."""

import numpy as np
import pytest

from topoform.dataset import generate_dataset
from topoform.problems import bridge, mbb_beam

# one status line per acceptance criterion, printed after the test summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def beam_small():
    """Reduced beam on the same physical domain (square elements of size 2)."""
    return mbb_beam(nx=30, ny=10, element_size=2.0)


@pytest.fixture(scope="session")
def bridge_small():
    return bridge(nx=30, ny=10, nz=2, element_size=2.0)


@pytest.fixture(scope="session")
def beam_small_dataset(beam_small):
    return generate_dataset(beam_small.family, 12, seed=42, problem=beam_small)
