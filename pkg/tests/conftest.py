import pytest

_acceptance_key = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_acceptance_key] = []


@pytest.fixture
def report(request, capsys):
    """Print and record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash[_acceptance_key]

    def emit(criterion: int, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
        lines.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_acceptance_key, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
