import time

import pytest

from shearlab.polycore import SparsePoly
from shearlab.regions import Polydisc
from shearlab.runge import birkhoff_pair
from shearlab.densegroup import two_generator_experiment
from shearlab.translations import DiagonalTranslation

ACCEPTANCE: dict = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


def birkhoff_targets(J: int = 3):
    z = SparsePoly.var(0, 1)
    T = [SparsePoly.constant(1, 1), z, z * z]
    return [(T[(2 * j) % 3], T[(2 * j + 1) % 3]) for j in range(J)]


@pytest.fixture(scope="session")
def birkhoff_run():
    start = time.perf_counter()
    f, g, sched = birkhoff_pair(5, birkhoff_targets(), 3, base=Polydisc.unit(1),
                                tolerances=[2.0 ** -j for j in range(1, 4)])
    return f, g, sched, time.perf_counter() - start


@pytest.fixture(scope="session")
def dense_run():
    start = time.perf_counter()
    rep = two_generator_experiment(DiagonalTranslation(2, 1), ["I", "F(z2)", "F(z2^2)"],
                                   Polydisc.unit(2), 1e-3)
    return rep, time.perf_counter() - start


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
