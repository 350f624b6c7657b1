import math

import numpy as np
import pytest

from metaplectic.grid import GridSpec, gaussian
from metaplectic.quantize import PhaseSymbol


@pytest.fixture(scope="session")
def line():
    """Self-dual 1-d grid."""
    return GridSpec(1, 128, math.sqrt(128))


@pytest.fixture(scope="session")
def plane():
    return GridSpec(2, 64, 8.0)


@pytest.fixture(scope="session")
def plane128():
    return GridSpec(2, 128, math.sqrt(128))


def packet(spec, shift=0.3, freq=0.2, width=1.0):
    d = spec.dim
    return gaussian(spec, center=[shift] * d, width=width, freq=[freq] * d)


def bump_symbol(spec, amp=0.5, center=(0.4, -0.3), width=1.5):
    """``1 + amp * Gaussian bump`` in phase space with an x-modulation."""
    d = spec.dim
    x0, xi0 = center

    def fn(x, xi):
        r = sum((x[i] - x0) ** 2 + (xi[i] - xi0) ** 2 for i in range(d))
        return 1 + amp * np.exp(-np.pi * r / width) * np.exp(1j * x[0])

    return PhaseSymbol.from_function(spec, fn)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
