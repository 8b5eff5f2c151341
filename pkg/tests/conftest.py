import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when == "teardown":
        return
    number, title = mark.args
    if rep.when == "setup" and rep.passed:
        return
    measured = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _RESULTS[number] = (title, "PASS" if rep.passed else "FAIL", measured)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, verdict, measured = _RESULTS[number]
        line = f"criterion {number:2d} {verdict}: {title}"
        if measured:
            line += f" [{measured}]"
        terminalreporter.write_line(line)
