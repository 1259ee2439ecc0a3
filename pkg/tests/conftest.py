import sys

import pytest

from lcmbrown.primes import build_table


@pytest.fixture(scope="session")
def small_table():
    return build_table(100_000)


@pytest.fixture(scope="session")
def table():
    return build_table(1_000_000)


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k:2d}: {detail}")
