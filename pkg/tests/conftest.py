"""Shared pytest plumbing: per-criterion acceptance report."""

import pytest

_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, label, ok, detail)``; returns ``ok`` for chaining."""

    def record(criterion, label, ok, detail):
        _ACCEPTANCE.setdefault(criterion, []).append((label, bool(ok), detail))
        print(f"[criterion {criterion}] {label}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[k]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{label} {'ok' if ok else 'FAILED'}: {d}" for label, ok, d in parts)
        terminalreporter.write_line(f"criterion {k:2d}: {status}  {detail}")
