import numpy as np
import pytest
from joblib import Parallel

from app.models import SampleCovariance
from app.services.likelihood import compute_covariance
from app.services.simulate import cholesky_from_dag, random_dag, sample_observations


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the long simulation checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running simulation checks (enable with --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def make_pd(rng: np.random.Generator, p: int) -> np.ndarray:
    """Well-conditioned random covariance."""
    A = rng.standard_normal((p, p))
    return A @ A.T / p + np.eye(p)


@pytest.fixture
def random_covariance():
    def build(p: int, seed: int = 0) -> SampleCovariance:
        return SampleCovariance(entries=make_pd(np.random.default_rng(seed), p))

    return build


@pytest.fixture
def synthetic():
    """(model, S) for a random DAG sampled with n observations."""

    def build(p: int, sparsity: float, n: int, seed: int = 0):
        model = cholesky_from_dag(random_dag(p, sparsity, seed), p, seed)
        X = sample_observations(model, n, seed=seed + 1)
        return model, compute_covariance(X)

    return build


@pytest.fixture
def parallel_calls(monkeypatch):
    """Record the keyword arguments of every joblib Parallel built by a module."""
    calls: list[dict] = []

    class Recording(Parallel):
        def __init__(self, *args, **kwargs):
            calls.append(kwargs)
            super().__init__(*args, **kwargs)

    def watch(module: str) -> list[dict]:
        monkeypatch.setattr(f"{module}.Parallel", Recording)
        return calls

    return watch
