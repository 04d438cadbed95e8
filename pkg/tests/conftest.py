"""Shared pytest plumbing: acceptance criterion result reporting."""

_CRITERION_RESULTS = {}


def record_criterion(number: int, description: str, passed: bool, detail: str = ""):
    """Remember a criterion outcome for the end-of-run summary line."""
    _CRITERION_RESULTS[number] = (description, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERION_RESULTS):
        description, passed, detail = _CRITERION_RESULTS[number]
        verdict = "PASS" if passed else "FAIL"
        line = f"criterion {number} [{verdict}] {description}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
