import time

import pytest

CRITERIA = {
    1: "linear contracts cannot implement the dispersed action",
    2: "two-point capacity closed form",
    3: "breakthrough trap and scale-up irrelevance",
    4: "coarse feedback threshold",
    5: "screening monotonicity and cutoff",
    6: "gradient and minimization oracles",
    7: "static solver vs grid oracle",
    8: "comparative statics",
    9: "long-run learning rates",
    10: "contraction and bridge",
    11: "speed limit probe",
    12: "extensions",
}

_outcomes: dict[int, list[tuple[str, bool, float]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): the test checks acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes.setdefault(marker.args[0], []).append((item.name, rep.passed, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, name in CRITERIA.items():
        runs = _outcomes.get(n)
        if not runs:
            tr.write_line(f"criterion {n:2d} NOT RUN  {name}")
            continue
        ok = all(passed for _, passed, _ in runs)
        secs = sum(d for _, _, d in runs)
        tr.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}  ({len(runs)} tests, {secs:.1f}s)")


@pytest.fixture
def budget():
    """Call with a limit in seconds at the end of a test to assert its wall time."""
    start = time.perf_counter()

    def check(limit: float) -> float:
        elapsed = time.perf_counter() - start
        assert elapsed < limit, f"took {elapsed:.1f}s, limit {limit}s"
        return elapsed

    return check
