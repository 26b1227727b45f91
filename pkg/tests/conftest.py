import numpy as np
import pytest

_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None and (report.when == "call" or report.failed):
        number, title = mark.args
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        results = item.config.stash[_CRITERIA]
        prev = results.get(number)
        ok = report.passed and (prev is None or prev[1])
        results[number] = (title, ok, detail or (prev[2] if prev else ""))
    return report


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_CRITERIA, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, detail = results[number]
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
