"""Prints one PASS/FAIL line per acceptance criterion after the run."""

import pytest

_CRITERIA: dict[str, tuple[str, str]] = {}  # nodeid -> (criterion, outcome)
_DETAILS: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): test that decides one acceptance criterion")


@pytest.fixture
def detail(request):
    """Call with a short measurement string; it is echoed next to the verdict."""

    def note(text: str) -> None:
        _DETAILS[request.node.nodeid] = text
        print(text)

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _CRITERIA[item.nodeid] = (marker.args[0], rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (name, outcome) in _CRITERIA.items():
        verdict = "PASS" if outcome == "passed" else "FAIL"
        extra = _DETAILS.get(nodeid, "")
        terminalreporter.write_line(f"{verdict}  {name}" + (f"  [{extra}]" if extra else ""))
