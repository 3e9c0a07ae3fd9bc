verdict_lines = []


def record_verdict(line):
    verdict_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if verdict_lines:
        terminalreporter.section("acceptance summary")
        for line in verdict_lines:
            terminalreporter.line(line)
