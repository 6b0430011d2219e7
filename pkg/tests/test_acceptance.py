"""Acceptance criteria 1-10; each test records a PASS/FAIL line shown in the terminal summary."""

import filecmp
import time

import numpy as np
import pytest

from conftest import record
from shearlab.cli import run
from shearlab.densegroup import conjugation_orbit
from shearlab.polycore import QQi, parse_poly
from shearlab.regions import Polydisc
from shearlab.runge import DisjointPair, RungeInfeasible, blend_coefficient
from shearlab.shearcalc import identity_suite, reduced_word_count, transposition_audit
from shearlab.translations import (
    DanielewskiSurface,
    DiagonalTranslation,
    danielewski_cocycle_check,
    danielewski_translation,
    escape_index,
    surface_escape_probe,
    surface_sample,
    zajac_check,
)

DETERMINISM: dict = {}


def test_criterion_01_identity_suite():
    start = time.perf_counter()
    failures = [f"n={n}:{c.name}" for n in (2, 3, 4, 5) for c in identity_suite(n, seed=0) if not c.holds]
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 5.0
    record(1, ok, f"identity suite n=2..5, {elapsed:.2f}s, failures={failures}")
    assert ok


def test_criterion_02_transposition_audit():
    a = transposition_audit()
    printed, alt = a["printed_certificate"], a["alternative_certificate"]
    ok = (not printed.verdict) and printed.counterexample is not None and alt.verdict and alt.max_deviation == 0
    record(2, ok, f"printed identity fails at {printed.counterexample and printed.counterexample['point']}, "
                  f"A^-1 B^-1 A^-1 = t exactly: {alt.verdict}")
    assert ok


def test_criterion_03_runge():
    pair = DisjointPair(Polydisc.ball(0j, 1.0), Polydisc.ball(8 + 0j, 1.0))
    start = time.perf_counter()
    errs = []
    for d in (20, 40, 80):
        try:
            c = blend_coefficient(pair, 1e-6, d)
        except RungeInfeasible as exc:
            c = exc.best
        errs.append((max(c.err1, c.err2), c.degree))
    elapsed = time.perf_counter() - start
    monotone = all(a[0] >= b[0] for a, b in zip(errs, errs[1:]))
    ok = errs[-1][0] < 1e-6 and errs[-1][1] <= 80 and monotone and elapsed < 5.0
    record(3, ok, "ladder " + ", ".join(f"{e:.2e}@{d}" for e, d in errs) + f", {elapsed:.2f}s")
    assert ok


def test_criterion_04_birkhoff(birkhoff_run):
    f, g, sched, elapsed = birkhoff_run
    conds = sched.conditions
    contained = all(st.contained for st in sched.stages)
    ok = len(conds) == 12 and all(c.holds for c in conds) and contained and elapsed < 60.0
    worst = max(c.bound / c.tolerance for c in conds)
    record(4, ok, f"{len(conds)} conditions, worst bound/tol {worst:.3f}, containment {contained}, {elapsed:.1f}s")
    assert ok


def test_criterion_05_two_generators(dense_run):
    rep, elapsed = dense_run
    errors = [r.bound for r in rep.results]
    drift_ok = bool(rep.drift) and all(d.exact_match for d in rep.drift)
    ok = len(errors) == 3 and max(errors) <= 1e-3 and drift_ok and elapsed < 120.0
    record(5, ok, f"errors {', '.join(f'{e:.2e}' for e in errors)}, drift exact {drift_ok}, {elapsed:.1f}s")
    assert ok


def test_criterion_06_freeness(dense_run):
    rep, _ = dense_run
    fr = rep.freeness
    ok = len(fr.words) == reduced_word_count(2, 4) == 160 and fr.min_margin > 1e-3
    record(6, ok, f"{len(fr.words)} reduced words, min margin {fr.min_margin:.3g}")
    assert ok


def test_criterion_07_generalized_translation():
    tau, K = DiagonalTranslation(2, 1), Polydisc.unit(2)
    esc = escape_index(tau, K)
    v3, v2 = zajac_check(tau, K, 3), zajac_check(tau, K, 2)
    certs = all("escape" in v.to_json() and "separation" in v.to_json() for v in (v3, v2))
    ok = esc == 3 and v3.holds and not v2.holds and certs
    record(7, ok, f"escape index {esc}, zajac m=3 {v3.holds}, m=2 {v2.holds}")
    assert ok


def test_criterion_08_danielewski():
    S = DanielewskiSurface(parse_poly("z^2 - 1", 1, ["z"]))
    t = danielewski_translation(S, 1)
    invariant = t.invariance_residual().is_zero()
    rng = np.random.default_rng(0)
    pairs = []
    while len(pairs) < 10:
        a, b = (QQi(int(rng.integers(-9, 10)), 0) / int(rng.integers(1, 10)) for _ in range(2))
        if a and b:
            pairs.append((a, b))
    cocycle = all(danielewski_cocycle_check(S, a, b).holds for a, b in pairs)
    image = t(QQi(1), QQi(0), QQi(1))
    curve = surface_escape_probe(S, 1, surface_sample(S, 50, seed=0), range(0, 13))
    increasing = curve.strictly_increasing_from(2)
    ok = invariant and cocycle and image == (QQi(1), QQi(3), QQi(2)) and increasing
    record(8, ok, f"invariance {invariant}, cocycle x10 {cocycle}, tau_1(1,0,1)={tuple(map(str, image))}, "
                  f"escape increasing {increasing}")
    assert ok


def test_criterion_09_conjugation_orbit():
    tau = DiagonalTranslation(2, 1)
    rep = conjugation_orbit(None, tau, ["F(z2)", "F(z2^2)"], [Polydisc.unit(2), Polydisc.ball((0j, 0j), 2.0)],
                            [1e-2, 1e-3])
    distinct = len({v.target for v in rep.visits}) == 2
    ok = rep.success and distinct and all(rep.identities.values())
    record(9, ok, ", ".join(f"{v.target} at m={v.m} err {v.error:.2e}" for v in rep.visits)
           + f", identities {all(rep.identities.values())}")
    assert ok


@pytest.mark.parametrize("command", ["runge", "birkhoff", "dense2gen"])
def test_criterion_10_determinism(command, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [run([command, "--seed", "0", "--out", str(d)]) for d in (a, b)]
    cmp = filecmp.dircmp(a, b)
    files = sorted(p.name for p in a.iterdir())
    same = all(filecmp.cmp(a / f, b / f, shallow=False) for f in files) and not cmp.left_only and not cmp.right_only
    ok = codes == [0, 0] and same and "report.json" in files
    DETERMINISM[command] = ok
    record(10, all(DETERMINISM.values()),
           "byte-identical reruns: " + ", ".join(f"{k}={v}" for k, v in DETERMINISM.items()))
    assert ok
