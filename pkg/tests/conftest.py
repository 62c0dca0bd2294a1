import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    report = outcome.get_result()
    number, title = marker.args
    results = item.config.stash[_RESULTS]
    if report.when == "call" or (report.when == "setup" and report.failed):
        results[number] = (title, "PASS" if report.passed else "FAIL", report.duration)


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, verdict, seconds = results[number]
        terminalreporter.write_line(f"criterion {number:>2} {verdict}  {title}  ({seconds:.1f} s)")
