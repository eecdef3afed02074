from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def fixture_path():
    return lambda name: FIXTURES / name


@pytest.fixture
def record_criterion():
    """Record one acceptance criterion outcome for the end-of-run summary."""

    def record(name: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE[name] = (bool(passed), detail)
        assert passed, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0])):
        passed, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
