"""Collects one PASS/FAIL line per acceptance criterion and prints them at the end."""
from collections import defaultdict

import pytest

_RESULTS = defaultdict(list)


class AcceptanceLog:
    def record(self, criterion, part, passed, detail=""):
        _RESULTS[criterion].append((part, bool(passed), detail))
        status = "PASS" if passed else "FAIL"
        print(f"criterion {criterion} [{part}]: {status} {detail}")


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_RESULTS):
        parts = _RESULTS[crit]
        ok = all(p for _, p, _ in parts)
        failed = [name for name, p, _ in parts if not p]
        tail = f" (failing parts: {', '.join(failed)})" if failed else ""
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}{tail}")
        for name, p, detail in parts:
            tr.write_line(f"    {'PASS' if p else 'FAIL'} {name}: {detail}")
