from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from unityforest import make_dataset  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"

# PASS/FAIL lines of the acceptance criteria, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def small_classification():
    """Two informative covariates plus noise, n=120."""
    rng = np.random.default_rng(7)
    n = 120
    X = rng.standard_normal((n, 5))
    y = np.where(X[:, 0] + 0.5 * X[:, 1] > 0, 2, 1)
    return make_dataset(X, y)


@pytest.fixture
def small_regression():
    rng = np.random.default_rng(8)
    n = 150
    X = rng.standard_normal((n, 4))
    y = 2.0 * X[:, 0] + 0.1 * rng.standard_normal(n)
    return make_dataset(X, y, task="regression")
