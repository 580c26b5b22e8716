import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jetop.workspace import load_corpus  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def corpus():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_corpus(name)
        return cache[name]

    return get


@pytest.fixture
def fixture_path():
    return lambda name: str(FIXTURES / name)


# acceptance bookkeeping ---------------------------------------------------

ACCEPTANCE: dict = {}


def pytest_collection_modifyitems(session, config, items):
    # the acceptance file summarises results of the other suites, so it runs last
    items.sort(key=lambda it: it.nodeid.split("::")[0].endswith("test_acceptance.py"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, note = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {note}")


RESULTS: dict = {}


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and not report.passed):
        RESULTS[report.nodeid.split("::")[-1]] = report.passed
