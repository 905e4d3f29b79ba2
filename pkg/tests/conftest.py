import os

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=25)
settings.register_profile("ci", deadline=None, max_examples=100)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when == "teardown" and report.passed:
        return
    number, title = mark.args
    ok = report.passed and not (report.when == "setup" and report.skipped)
    if report.when == "call" or not report.passed:
        detail = getattr(item, "criterion_detail", "")
        if not report.passed and report.longrepr is not None and not detail:
            detail = str(report.longrepr).strip().splitlines()[-1][:160]
        _criteria[number] = (ok, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        ok, title, detail = _criteria[number]
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}"
        tr.write_line(line + (f"  [{detail}]" if detail else ""))
