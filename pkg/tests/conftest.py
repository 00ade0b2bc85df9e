import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for the terminal summary and echo it."""

    def _report(name: str, passed: bool, detail: str) -> None:
        line = f"{name}: {'PASS' if passed else 'FAIL'} | {detail}"
        request.config.stash[_LINES].append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
