import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gwl import fixtures, models, nn

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def toy4_net() -> nn.Network:
    """TinyCNN trained on 4x4 synthetic toy digits (deterministic)."""
    return fixtures.trained_toy_network(side=4)


@pytest.fixture(scope="session")
def toy4_model(toy4_net) -> models.NetworkModel:
    return models.NetworkModel(toy4_net, "nn:toy4")


@pytest.fixture
def fixture_net() -> nn.Network:
    return nn.tiny_cnn(3, 3, 2, seed=123)


@pytest.fixture
def fixture_x() -> np.ndarray:
    return np.array([0, 1, 1, 0, 1, 0, 0, 0, 1])


# -- acceptance report ---------------------------------------------------------

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion():
    """``criterion(n, title, passed, detail)`` records one acceptance line and returns ``passed``."""

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        _CRITERIA[number] = (title, bool(passed), detail)
        print(f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
