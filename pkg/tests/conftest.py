from __future__ import annotations

import numpy as np
import pytest

from halfspace_jump_lab.kernel import KernelParams

BETAS = [(0.0, 0.0, 0.0, 0.0), (0.5, 0.0, 0.0, 0.0), (0.3, 0.4, 0.0, 0.0), (0.5, 0.4, 0.5, 0.5)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def plain():
    return KernelParams(1.5, 1)


@pytest.fixture(params=BETAS, ids=lambda b: "beta=" + ",".join(f"{v:g}" for v in b))
def beta(request):
    return request.param


def random_points(rng, n, d, scale=3.0):
    """n points in the open half-space with heights spread over several decades."""
    x = rng.normal(size=(n, d)) * scale
    x[:, -1] = np.exp(rng.uniform(np.log(1e-3), np.log(10.0), size=n))
    return x


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
