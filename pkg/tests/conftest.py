import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from medax.configuration import Configuration

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def equilateral() -> Configuration:
    ang = np.deg2rad([0.0, 120.0, 240.0])
    return Configuration(np.c_[np.cos(ang), np.sin(ang)])


def random_configuration(rng: np.random.Generator, n: int, k: int) -> Configuration:
    while True:
        v = rng.normal(size=(k, n))
        try:
            return Configuration.from_vectors(v)
        except ValueError:
            continue


@st.composite
def configurations(draw, dims=(2, 3, 4)):
    """Generic configurations with n in ``dims`` and k in [2, n + 1]."""
    n = draw(st.sampled_from(dims))
    k = draw(st.integers(2, n + 1))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_configuration(np.random.default_rng(seed), n, k)


@pytest.fixture
def tri():
    return equilateral()


@pytest.fixture
def quarter():
    return Configuration(np.array([[1.0, 0.0], [0.0, 1.0]]))


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
