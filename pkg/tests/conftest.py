from __future__ import annotations

import pytest

from annotaudit.corpus import dataset_from_records

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        previous = _criteria.get(number)
        # a criterion spread over several tests fails if any of them fails
        if previous is None or previous[0] == "PASS" or status == "FAIL":
            _criteria[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")


@pytest.fixture
def table1():
    """Three short tweets; t1 is the contentious one."""
    return dataset_from_records(
        [
            ("t1", "You are such a b*tch", "Hate"),
            ("t2", "Don't be such a b*tch", "Offensive"),
            ("t3", "B*tch please, try hard!", "Offensive"),
        ],
        schema=["Hate", "Offensive"],
    )
