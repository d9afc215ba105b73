from collections import defaultdict

import pytest

_outcomes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    # a criterion fails if any phase fails; the call phase carries the verdict otherwise
    if rep.when == "call" or rep.failed:
        details = [v for k, v in rep.user_properties if k == "detail"]
        _outcomes[mark.args[0]].append((item.name, rep.passed, "; ".join(details)))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        rows = _outcomes[n]
        ok = all(passed for _, passed, _ in rows)
        detail = " | ".join(f"{name}: {d}" if d else name for name, _, d in rows)
        terminalreporter.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")
