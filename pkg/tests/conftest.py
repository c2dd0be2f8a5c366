import numpy as np
import pytest

from pmmh.data import simulate_dataset
from pmmh.models import build_model
from pmmh.oracle import LinearGaussianSsm, kalman_loglik


@pytest.fixture(scope="session")
def oracle_model():
    return build_model("linear_gaussian")


@pytest.fixture(scope="session")
def oracle_data(oracle_model):
    """AR(1) plus noise with a=0.9, q=0.3, r=0.5, T=50."""
    return simulate_dataset(oracle_model, {}, 50, 0).y


@pytest.fixture(scope="session")
def oracle_exact(oracle_model, oracle_data):
    v = oracle_model.default_values()
    return kalman_loglik(LinearGaussianSsm(v["a"], v["q"], v["r"], oracle_model.m0, oracle_model.p0), oracle_data)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record a PASS/FAIL line for an exit criterion, then assert on it."""

    def report(number, name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number:>2} {name}: {detail}"
        _CRITERIA.append(line)
        print(line)
        assert passed, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
