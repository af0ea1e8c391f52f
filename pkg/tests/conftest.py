import numpy as np
import pytest

from revpref import Dataset


@pytest.fixture
def violating_pair() -> Dataset:
    # each bundle is strictly cheaper at the other's prices
    return Dataset.from_arrays([[1.0, 2.0], [2.0, 1.0]], [[1.0, 2.0], [2.0, 1.0]])


@pytest.fixture
def cobb_douglas_data() -> Dataset:
    rng = np.random.default_rng(11)
    P = rng.uniform(1.0, 2.0, size=(8, 2))
    X = np.array([0.6, 0.4]) * 5.0 / P
    return Dataset.from_arrays(P, X, np.full(8, 5.0))


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
