import pytest

CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


_RANK = {"skipped": 0, "passed": 1, "failed": 2}


def pytest_runtest_logreport(report):
    number = getattr(report, "criterion", None)
    if number is None:
        return
    if report.when != "call" and report.outcome == "passed":
        return
    title, previous = CRITERIA.get(number, (report.criterion_title, "skipped"))
    outcome = report.outcome if _RANK[report.outcome] > _RANK[previous] else previous
    CRITERIA[number] = (title, outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = marker.args[0]
        report.criterion_title = marker.args[1]


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        title, outcome = CRITERIA[number]
        label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[outcome]
        terminalreporter.write_line(f"criterion {number}: {label}  {title}")
