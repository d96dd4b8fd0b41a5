import pytest

from smvi.specfile import loads_problem, template

EXAMPLES = ("example1", "example2", "example3", "example4")


def example(name):
    return loads_problem(template(name), name=name)


@pytest.fixture(scope="session")
def problems():
    return {name: example(name) for name in EXAMPLES}


# acceptance reporting: one line per criterion in the terminal summary

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    number, title = mark.args
    if report.when == "setup" and report.passed:
        return
    # a criterion with several parametrized cases fails if any case fails
    failed = report.failed or _CRITERIA.get(number, ("", "PASS"))[1] == "FAIL"
    _CRITERIA[number] = (title, "FAIL" if failed else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {title}")
