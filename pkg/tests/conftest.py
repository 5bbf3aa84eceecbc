import os

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def measured(request):
    """Dict a criterion test fills with the numbers it measured."""
    marker = request.node.get_closest_marker("criterion")
    store = {}
    if marker is not None:
        _RESULTS.setdefault(marker.args[0], {"title": marker.args[1], "outcome": None})["measured"] = store
    return store


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    entry = _RESULTS.setdefault(marker.args[0], {"title": marker.args[1], "outcome": None})
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        entry["outcome"] = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        details = ", ".join(f"{k}={v}" for k, v in entry.get("measured", {}).items())
        line = f"criterion {number:>2}: {entry['outcome'] or 'NOT RUN'}  {entry['title']}"
        terminalreporter.write_line(line + (f"  [{details}]" if details else ""))


def extended_enabled() -> bool:
    return os.environ.get("UNROLLCS_EXTENDED") == "1"
