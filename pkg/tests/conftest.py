import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS = pytest.StashKey[dict]()


class Criterion:
    """Collects check outcomes for one acceptance criterion."""

    def __init__(self, number, title, limit=None):
        self.number = number
        self.title = title
        self.limit = limit
        self.failures = []
        self.notes = []

    def check(self, ok, message):
        if not ok:
            self.failures.append(message)
        return ok

    def note(self, message):
        self.notes.append(message)

    def line(self, elapsed):
        status = "FAIL" if self.failures else "PASS"
        detail = "; ".join(self.failures or self.notes)
        return f"ACCEPTANCE {self.number} {status} [{elapsed:.1f}s] {self.title}" + (f": {detail}" if detail else "")


@pytest.fixture
def acceptance(request):
    """Run ``body(criterion)`` and record a PASS/FAIL line for the summary."""
    results = request.config.stash.setdefault(_RESULTS, {})

    def run(number, title, body, limit=None):
        crit = Criterion(number, title, limit)
        start = time.perf_counter()
        try:
            body(crit)
        except Exception as exc:  # a crash is a failed criterion, reported as such
            crit.failures.append(f"{type(exc).__name__}: {exc}")
        elapsed = time.perf_counter() - start
        if limit is not None:
            crit.check(elapsed < limit, f"runtime {elapsed:.1f}s exceeds {limit}s")
        line = crit.line(elapsed)
        results[number] = line
        print(line)
        if crit.failures:
            pytest.fail(line, pytrace=False)

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if results:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
