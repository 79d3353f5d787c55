import numpy as np
import pytest

from bassopt import Economics, ResponseModel


@pytest.fixture
def bench_resp() -> ResponseModel:
    """Benchmark response parameters used throughout the test suite."""
    return ResponseModel("sqrt", p0=0.01, bp=0.01, q0=0.1, bq=0.1)


@pytest.fixture
def bench_econ() -> Economics:
    return Economics(gamma=1000.0, theta=0.01)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
