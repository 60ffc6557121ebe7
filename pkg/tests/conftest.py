"""Shared pytest hooks: one PASS/FAIL line per acceptance criterion."""

import pytest

CRITERIA = {
    1: "eigenvalues of the order-2 covariance in closed form",
    2: "eigenvalue / chi-square parameter table for m=1..4",
    3: "asymptotic critical points from 50k mixture draws",
    4: "finite-sample critical points of T_m",
    5: "critical points of cv, MW and SU",
    6: "power slices at 10k reps",
    7: "Greenwood null law (KS at 1%)",
    8: "correlation of the cv process at ln 2 and 2 ln 2",
    9: "property suites",
    10: "synthetic CLI workflow",
}

_outcomes = {}
_details = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def measured(request):
    """Record a measured value for the acceptance summary."""
    marker = request.node.get_closest_marker("criterion")

    def record(text):
        if marker is not None:
            _details.setdefault(marker.args[0], []).append(text)

    return record


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    n = marker.args[0]
    ok = call.excinfo is None
    _outcomes.setdefault(n, []).append((item.name, ok))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        results = _outcomes.get(n)
        if not results:
            continue
        ok = all(r for _, r in results)
        failed = [name for name, r in results if not r]
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {CRITERIA[n]}"
        if failed:
            line += "  (failing: " + ", ".join(failed) + ")"
        tr.write_line(line)
        for d in _details.get(n, []):
            tr.write_line(f"      {d}")
