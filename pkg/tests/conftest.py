"""Shared fixtures: a ledger of acceptance lines printed at the end of the run."""
import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def criterion(request):
    """``check(name, ok, detail)`` records one PASS/FAIL line and returns ``ok``."""
    lines = request.config.stash[_LINES]

    def check(name: str, ok: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
        lines.append(line)
        print(line)
        return bool(ok)

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
    npass = sum(line.startswith("[PASS]") for line in lines)
    terminalreporter.write_line(f"{npass}/{len(lines)} acceptance lines pass")
