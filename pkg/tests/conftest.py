import numpy as np
import pytest

from squeak import Dataset, KernelSpec

ACCEPTANCE_LINES: list[str] = []


def two_clusters(n: int, seed: int, spread: float = 0.7) -> Dataset:
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack([rng.normal(-2.0, spread, (half, 2)), rng.normal(2.0, spread, (n - half, 2))])
    return Dataset(X)


@pytest.fixture
def rbf():
    return KernelSpec.gaussian(1.0)


@pytest.fixture
def small_data():
    rng = np.random.default_rng(7)
    return Dataset(rng.normal(size=(12, 3)))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
