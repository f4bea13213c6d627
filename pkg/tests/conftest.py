import functools

import pytest
from hypothesis import HealthCheck, settings

from decaycorr import systems as sysm
from decaycorr.tower import build_induced_tower

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def induced(gamma=0.5, d=2, depth=2000):
    return build_induced_tower(sysm.IntermittentCircle(gamma, d), depth)


@functools.lru_cache(maxsize=None)
def doubling_induced(depth=60):
    return build_induced_tower(sysm.Doubling(), depth)


@pytest.fixture(scope="session")
def tower_half():
    """Induced tower of the gamma = 1/2, d = 2 circle map at moderate depth."""
    return induced()


@pytest.fixture(scope="session")
def tower_doubling():
    return doubling_induced()


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
