"""Collects acceptance results so the run ends with one line per criterion."""

import re

_results: dict[str, list[tuple[str, str]]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    name = report.nodeid.split("::")[-1]
    m = re.match(r"test_criterion_(\d+)", name)
    if m:
        _results.setdefault(m.group(1), []).append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(_results, key=int):
        checks = _results[key]
        verdict = "PASS" if all(o == "passed" for _, o in checks) else "FAIL"
        tr.write_line(f"criterion {key}: {verdict}")
        for name, outcome in checks:
            tr.write_line(f"    {name}: {outcome}")
