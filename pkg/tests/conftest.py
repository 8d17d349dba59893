import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def correlated_views(rng, n=300, dx=4, dy=5):
    """Two views sharing a 2-D latent, plus noise."""
    L = rng.standard_normal((n, 2))
    X = L @ rng.standard_normal((2, dx)) + 0.7 * rng.standard_normal((n, dx))
    Y = L @ rng.standard_normal((2, dy)) + 0.7 * rng.standard_normal((n, dy))
    return X, Y


def binary_attribute(rng, X, strength=1.0):
    s = strength * X[:, 0] + rng.standard_normal(X.shape[0])
    return np.where(s > np.median(s), 2, 1)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
