import math

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def gelfand_model():
    from bubbleshoot.growth import gelfand

    return gelfand()


@pytest.fixture(scope="session")
def cubic_model():
    from bubbleshoot.growth import make_model

    return make_model("power-exp", p=3)


def gelfand_lambda(mu):
    alpha = math.expm1(0.5 * mu)
    return 8.0 * alpha / (1.0 + alpha) ** 2


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line; the lines are repeated in the terminal summary."""

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
