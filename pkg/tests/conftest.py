import pytest

CRITERIA = {
    1: "read guard: no input consumes a value above the reader's level",
    2: "write guard: every enqueue is at or above the writer's level, or a nonce",
    3: "subject reduction after every step",
    4: "progress: no stuck states, one terminal for two-party-ok",
    5: "subtyping laws and oracle agreement",
    6: "adequacy of monitor types and canonical processes",
    7: "lattice axioms on bundled lattices",
    8: "taint set agrees with the reachability oracle",
    9: "seed 42 traces are byte-identical",
    10: "refresh leaves the bank untouched and it completes",
}

_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        for n in marker.args:
            _outcomes.setdefault(n, []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, text in CRITERIA.items():
        results = _outcomes.get(n)
        if results is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {text}")
