"""Shared pytest setup: the acceptance summary printed after every run."""

import pytest

CRITERIA = {
    1: "softmax N=4 equivalent with the expected formulas; N=8 and N=16 equivalent",
    2: "softmax without its barrier reports the buf[1] read/write race, exit code 2",
    3: "confluence over random programs",
    4: "checked races coincide with trace-definition races",
    5: "is_zero exact on random zero and non-zero exp-polynomial sums",
    6: "concrete co-execution agrees on equivalent pairs; witnesses separate the rest",
    7: "matmul, reduction race, warp deadlock and out-of-bounds benchmarks",
    8: "every bundled kernel is equivalent to itself",
    9: "reports are byte-identical across runs and job counts",
}

_results: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test belongs to acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if rep.when == "call" or rep.outcome != "passed":
        _results.setdefault(n, []).append(rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n, text in CRITERIA.items():
        got = _results.get(n)
        if not got:
            status = "NOT RUN"
        else:
            status = "PASS" if all(o == "passed" for o in got) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  {text}")
