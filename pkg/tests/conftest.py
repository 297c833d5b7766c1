import pytest

# one line per acceptance criterion, printed after the run
_ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record ``(number, description)`` and a measured detail for the summary."""
    entry = {"detail": ""}

    def record(number, description, detail=""):
        entry.update(number=number, description=description, detail=detail)

    yield record
    if "number" in entry:
        _ACCEPTANCE[entry["number"]] = (request.node.nodeid, entry)


_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        _RESULTS[item.nodeid] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        nodeid, entry = _ACCEPTANCE[number]
        status = "PASS" if _RESULTS.get(nodeid) else "FAIL"
        line = f"[{status}] {number:>2}. {entry['description']}"
        if entry["detail"]:
            line += f" ({entry['detail']})"
        terminalreporter.write_line(line)
