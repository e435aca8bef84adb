import pytest

RESULTS_KEY = pytest.StashKey[dict]()


@pytest.fixture
def record(request):
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""
    results = request.config.stash.setdefault(RESULTS_KEY, {})

    def _record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        results[label] = line
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(RESULTS_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(results, key=_order):
        terminalreporter.write_line(results[label])


def _order(label):
    head = label.split()[0]
    return (0, int(head)) if head.isdigit() else (1, label)
