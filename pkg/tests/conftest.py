import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from eivlof.dgp import ModelSpec, generate

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def null_data():
    """A null-model H11 dataset with p = 2, n = 100, N = 400."""
    return generate(ModelSpec("H11", 2), 100, 400, seed=11)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
