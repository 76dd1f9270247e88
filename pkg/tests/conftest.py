import contextlib

import pytest


def pytest_configure(config):
    config._criteria = {}


@pytest.fixture
def criterion(request):
    """``with criterion(n, label) as note:`` records a pass/fail part of acceptance criterion n.

    ``note(text)`` attaches a measured value to the line. Exceptions propagate unchanged.
    """
    store = request.config._criteria

    @contextlib.contextmanager
    def part(number, label):
        details = []
        ok = False
        try:
            yield details.append
            ok = True
        finally:
            store.setdefault(number, []).append((label, ok, "; ".join(details)))
            print(f"criterion {number} [{label}]: {'PASS' if ok else 'FAIL'} {'; '.join(details)}")

    return part


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not config._criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(config._criteria):
        parts = config._criteria[number]
        ok = all(p[1] for p in parts)
        text = " | ".join(f"{label}: {'ok' if good else 'FAILED'}" + (f" ({d})" if d else "")
                          for label, good, d in parts)
        tr.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}")
