import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (report.when == "call" or report.failed):
        return
    number, title = marker.args
    detail = dict(report.user_properties).get("detail", "")
    if report.failed and call.excinfo is not None:
        detail = f"{detail} | {call.excinfo.exconly().splitlines()[0]}".strip(" |")
    item.config.stash[_RESULTS][number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, status, detail = results[number]
        line = f"criterion {number:>2}: {status}  {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
