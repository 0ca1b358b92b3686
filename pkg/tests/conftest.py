import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "roughdrive", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("roughdrive")


@pytest.fixture(autouse=True)
def _cold_solve_cache():
    from roughdrive.harness.runner import clear_caches
    clear_caches()
    yield


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])
