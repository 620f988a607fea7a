import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def s3_spec():
    from kwrace.ffrace import load_builtin

    return load_builtin("s3_f7")


@pytest.fixture(scope="session")
def s3_race(s3_spec):
    from kwrace.ffrace import build_race

    return build_race(s3_spec)


@pytest.fixture(scope="session")
def counts10(s3_spec):
    """Live place counts for q = 7, n <= 10 (about two minutes)."""
    from kwrace.oracle import count_classes

    return count_classes(s3_spec, 10)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def report():
    """Call ``report(k, ok, detail)`` to add a line to the acceptance summary."""

    def add(k, ok, detail):
        _ACCEPTANCE.append(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(_ACCEPTANCE[-1])

    return add


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
