from fractions import Fraction

import numpy as np
import pytest

from shearlab.densegroup import (
    ScheduleInfeasible,
    ShearTarget,
    approximate_target,
    conjugate_by_power,
    conjugate_formula,
    conjugation_orbit,
    drift_check,
    map_distance,
    parse_target,
    schedule_build,
    shear_map,
    two_generator_experiment,
)
from shearlab.polycore import QQi, SparsePoly
from shearlab.regions import GridSpec, Polydisc
from shearlab.shearcalc import NotRepresentableError, make_cyclic_I, random_poly
from shearlab.translations import DiagonalTranslation

TAU2 = DiagonalTranslation(2, 1)


def test_parse_targets():
    assert parse_target("id", 2) == ()
    (I,) = parse_target("I", 2)
    assert I.map == make_cyclic_I(2).map
    (I3,) = parse_target("I", 3)
    assert I3.map == make_cyclic_I(3).map
    (F,) = parse_target("F(0, z2^2)", 2)
    assert F.h == SparsePoly.var(0, 1) ** 2
    assert len(parse_target(["I", "F(z2)"], 2)) == 2
    with pytest.raises(NotRepresentableError):
        parse_target("F(z2, z2)", 2)
    with pytest.raises(NotRepresentableError):
        parse_target("G(z2)", 2)


def test_conjugate_example_n2():
    z1, z2 = SparsePoly.variables(2)
    F = shear_map(2, SparsePoly.var(0, 1) ** 2)
    last = conjugate_by_power(F, TAU2, 2).components[-1].as_poly()
    assert last == -z1 + (z2 + 2) ** 2 - 4
    assert conjugate_by_power(F, TAU2, 0) == F


@pytest.mark.parametrize("n", [2, 3])
def test_drift_constant_random_g(n):
    rng = np.random.default_rng(n)
    tau = DiagonalTranslation(n, Fraction(3, 2))
    for m in (1, 2, 5):
        g = random_poly(rng, n - 1, 3)
        F = shear_map(n, g)
        check = drift_check(F, g, tau, m)
        assert check.exact_match
        assert check.constant == -2 * (-1) ** n * m * Fraction(3, 2)
        # pointwise agreement on 50 random rational points
        lhs = conjugate_by_power(F, tau, m)
        rhs = conjugate_formula(n, g, tau, m)
        for _ in range(50):
            pt = [QQi(Fraction(int(a), 7), Fraction(int(b), 5)) for a, b in rng.integers(-9, 10, (n, 2))]
            assert lhs.evaluate_exact(pt) == rhs.evaluate_exact(pt)


def test_map_distance_translation():
    z1, z2 = SparsePoly.variables(2)
    from shearlab.shearcalc import SemiSymbolicMap
    A = SemiSymbolicMap([z1 + 1, z2])
    B = SemiSymbolicMap([z1, z2])
    assert map_distance(A, B, Polydisc.unit(2), GridSpec(5)).value == pytest.approx(1.0)


def test_identity_word_is_free():
    r = approximate_target((), TAU2, SparsePoly.zero(1), Polydisc.unit(2), 1e-9)
    assert r.bound == 0 and r.achieved and r.powers == ()


def test_empty_experiment_keeps_freeness():
    rep = two_generator_experiment(TAU2, [], Polydisc.unit(2), 1e-3, word_length=2)
    assert rep.results == [] and rep.schedule is None
    assert rep.freeness.to_json()["word_count"] == 16


def test_single_I_target():
    rep = two_generator_experiment(TAU2, ["I"], Polydisc.unit(2), 1e-3, word_length=2)
    (r,) = rep.results
    assert r.achieved and len(rep.schedule.stages) == 1
    (m,) = r.powers
    assert r.generator_word() == [("tau", -m), ("F", 1), ("tau", m)]


def test_dense_experiment(dense_run):
    rep, _ = dense_run
    assert rep.success
    for r in rep.results:
        assert r.bound <= 1e-3 and r.measured <= 1e-3
    assert rep.drift and all(d.exact_match for d in rep.drift)
    assert rep.freeness.passed and rep.freeness.min_margin > 1e-3


def test_dense_independent_recheck(dense_run):
    """Rebuild each conjugate by plain composition and compare with the target map on the grid."""
    rep, _ = dense_run
    K = Polydisc.unit(2)
    for r in rep.results:
        (t,) = r.word
        (m,) = r.powers
        conj = conjugate_by_power(rep.F, TAU2, m)
        assert map_distance(conj, t.map, K, GridSpec(7)).value <= 1e-3


def test_unreachable_tolerance_raises():
    with pytest.raises(ScheduleInfeasible):
        two_generator_experiment(TAU2, ["F(z2)"], Polydisc.unit(2), 1e-14, max_degree=24, word_length=1)


def test_conjugation_orbit_given_map():
    F = shear_map(2, SparsePoly.var(0, 1) ** 2)
    rep = conjugation_orbit(F, TAU2, ["F(z2^2)"], [Polydisc.unit(2)], [1e-9], m_range=range(0, 4))
    (v,) = rep.visits
    assert v.m == 0 and v.error == 0.0
    assert all(rep.identities.values())


def test_conjugation_orbit_built():
    L1, L2 = Polydisc.unit(2), Polydisc.ball((0j, 0j), 2.0)
    rep = conjugation_orbit(None, TAU2, ["F(z2)", "F(z2^2)"], [L1, L2], [1e-2, 1e-3])
    assert rep.success
    assert len({v.m for v in rep.visits}) == 2
    assert all(rep.identities.values())


def test_shear_target_cyclic_n3():
    t = ShearTarget.cyclic(3)
    assert t.map == make_cyclic_I(3).map


def test_schedule_build_invariants():
    sched = schedule_build(["id", "F(z2)", "F(z2^2)"], [Polydisc.unit(2)], TAU2)
    assert all(sched.invariants.values())
    ks = [s.k for s in sched.stages]
    assert ks == sorted(set(ks))
    tols = [s.tolerance for s in sched.stages]
    assert tols == [1e-2, 5e-3, 2.5e-3]
    for s in sched.stages[1:]:
        assert s.margin is not None and s.margin > 0
