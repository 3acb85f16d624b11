import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from instances import feasible_suite, t1_instance  # noqa: E402


@pytest.fixture(scope="session")
def suite():
    """The 100 seeded tiny instances shared by the cross-checks."""
    return feasible_suite(100)


@pytest.fixture
def t1():
    return t1_instance()


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
