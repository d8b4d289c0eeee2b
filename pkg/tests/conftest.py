ACCEPTANCE_LINES: dict[str, str] = {}


def record_criterion(key: str, name: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {key} {name}: {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.lstrip("#"))):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
