import pytest

ACCEPTANCE_LINES: list[str] = []


class _Recorder:
    def __call__(self, number: int, title: str, ok: bool, detail: str, seconds: float) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail} | {seconds:.1f} s"
        ACCEPTANCE_LINES.append(line)
        print(line)


@pytest.fixture
def acceptance():
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
