import pytest

_LINES = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_LINES] = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion and assert it.

    ``criterion(n, title, checks)`` takes ``(label, ok, detail)`` triples.
    """
    lines = request.config.stash[_LINES]

    def record(n, title, checks):
        ok = all(c[1] for c in checks)
        parts = [f"{label}: {detail}" + ("" if good else " [FAIL]") for label, good, detail in checks]
        line = f"criterion {n} ({title}): {'PASS' if ok else 'FAIL'} | " + "; ".join(parts)
        lines[n] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" or not rep.failed:
        return
    n, title = mark.args
    lines = item.config.stash[_LINES]
    if n not in lines:
        msg = str(call.excinfo.value).splitlines()[0] if call.excinfo else "error"
        lines[n] = f"criterion {n} ({title}): FAIL | raised {call.excinfo.typename}: {msg}"
