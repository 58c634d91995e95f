"""Per-criterion PASS/FAIL summary for the acceptance suite."""
from collections import defaultdict

_results = defaultdict(list)
_titles = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, title): acceptance criterion id")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _titles[mark.args[0]] = mark.args[1]


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome == "failed":
        nodeid = report.nodeid
        for number, title in _titles.items():
            if f"test_criterion_{number:02d}" in nodeid:
                _results[number].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _titles:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_titles):
        outcomes = _results.get(number)
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(
            f"criterion {number:2d} {status:7s} {_titles[number]}")
