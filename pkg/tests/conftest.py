import pytest

_CRITERIA: dict[str, list[tuple[bool, str]]] = {}


@pytest.fixture
def criterion():
    """Record a pass/fail check for an acceptance criterion, then assert it."""

    def check(label: str, ok: bool, detail: str) -> None:
        _CRITERIA.setdefault(label, []).append((bool(ok), detail))
        assert ok, f"{label}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: int(s.split()[0].lstrip("C"))):
        checks = _CRITERIA[label]
        ok = all(c[0] for c in checks)
        details = "; ".join(d for _, d in checks)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {details}")
