import math

import numpy as np
import pytest

from ctpmhd import areamap, families
from ctpmhd.flowmap import Box
from ctpmhd.scene import Scene

TWO_PI = 2 * math.pi
CYL_BOX = Box((0.0, TWO_PI), (0.0, TWO_PI), (0.2, 1.5))
UNIT_BOX = Box((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))


@pytest.fixture(scope="session")
def identity_map():
    am = areamap.identity(((0.0, 1.0), (0.0, 1.0)))
    return families.build_s1("0", am, 0.0, UNIT_BOX)


@pytest.fixture(scope="session")
def cylinder_map():
    return Scene.load("cylinder").flowmap


@pytest.fixture(scope="session")
def fig1_map():
    return Scene.load("fig1").flowmap


@pytest.fixture(scope="session")
def potential_map():
    return Scene.load("potential").flowmap


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_points(box, n, rng, margin=1e-3):
    lo = box.lo + margin
    hi = box.hi - margin
    return lo + (hi - lo) * rng.random((n, 3))


# -- acceptance summary ---------------------------------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): numbered exit criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        n, title = mark.args
        _ACCEPTANCE[n] = (title, report.passed, getattr(item, "detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[n]
        line = f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}"
        if detail:
            line += f": {detail}"
        terminalreporter.write_line(line)
