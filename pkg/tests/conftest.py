import time

import numpy as np
import pytest

from miscible_slip.config import ProblemConfig
from miscible_slip.geometry import build_rect_mesh, partition_from_slip_sides
from miscible_slip.spaces import build_spaces

_ACCEPTANCE = {}


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion."""
    box = {}

    def record(number, title, detail=""):
        box.update(number=number, title=title, detail=detail)

    start = time.perf_counter()
    yield record
    if box:
        rep = getattr(request.node, "call_report", None)
        box["seconds"] = time.perf_counter() - start
        box["passed"] = bool(rep is not None and rep.passed)
        _ACCEPTANCE[box["number"]] = box


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.call_report = rep


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        b = _ACCEPTANCE[n]
        status = "PASS" if b.get("passed") else "FAIL"
        terminalreporter.write_line(
            f"[{status}] criterion {n:>2}: {b['title']} ({b['seconds']:.1f} s) {b['detail']}")


@pytest.fixture(scope="session")
def spaces8():
    return build_spaces(build_rect_mesh(8, 8, partition=partition_from_slip_sides(["bottom"])))


@pytest.fixture
def rng():
    return np.random.default_rng(20241019)


@pytest.fixture
def small_config():
    return ProblemConfig.from_dict({
        "domain": {"slip_sides": ["bottom"]},
        "physics": {"nu0": 1.0, "d": 0.1, "k": 0.01, "T": 0.03, "force": "vortex",
                    "force_params": {"amplitude": 5.0}, "C0": "gaussian"},
        "discretization": {"nx": 4, "ny": 4, "dt": 0.01},
    })
