from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("fast", max_examples=25, deadline=None)
settings.load_profile("fast")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(rng, d: int, rank: int | None = None) -> np.ndarray:
    m = rank or d
    g = rng.standard_normal((d, m)) + 1j * rng.standard_normal((d, m))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
