from fractions import Fraction

import mpmath
import pytest

from shearlab.polycore import QQi, SparsePoly, poly_translate
from shearlab.regions import GridSpec, Polydisc, RegionError
from shearlab.runge import (
    Disc,
    DisjointPair,
    PiecewiseTarget,
    RungeInfeasible,
    blend_coefficient,
    certify_sparse,
    grid_sup,
    hypercyclic_orbit_error,
    runge_piecewise,
)

z = SparsePoly.var(0, 1)
PAIR = DisjointPair(Polydisc.ball(0j, 1.0), Polydisc.ball(8 + 0j, 1.0))


def boundary_error_mp(p: SparsePoly, center: float, target: complex, samples: int = 720) -> float:
    """Independent check: exact coefficients evaluated at 60 digits on the circle (maximum principle)."""
    worst = mpmath.mpf(0)
    with mpmath.workdps(60):
        coeffs = [mpmath.mpc(0)] * (p.degree + 1)
        for e, c in p.items():
            c = QQi.coerce(c)
            coeffs[e[0]] = mpmath.mpc(mpmath.mpf(c.re.numerator) / c.re.denominator,
                                      mpmath.mpf(c.im.numerator) / c.im.denominator)
        for k in range(samples):
            x = center + mpmath.expjpi(mpmath.mpf(2 * k) / samples)
            val = mpmath.mpc(0)
            for c in reversed(coeffs):
                val = val * x + c
            worst = max(worst, abs(val - target))
    return float(worst)


@pytest.fixture(scope="module")
def cert():
    return blend_coefficient(PAIR, 1e-6, 80)


def test_certificate_within_tolerance(cert):
    assert cert.reached and cert.degree <= 80
    assert max(cert.err1, cert.err2) < 1e-6
    # frozen: the ladder first certifies at degree 32
    assert cert.degree == 32


def test_certificate_dominates_independent_sampling(cert):
    assert boundary_error_mp(cert.p, 0.0, 1) <= cert.err1
    assert boundary_error_mp(cert.p, 8.0, 0) <= cert.err2
    # the bound is not wildly pessimistic either
    assert cert.err1 < 10 * boundary_error_mp(cert.p, 0.0, 1)


def test_ladder_monotone():
    errs = []
    for d in (20, 40, 80):
        try:
            c = blend_coefficient(PAIR, 1e-6, d)
        except RungeInfeasible as exc:
            c = exc.best
        errs.append(max(c.err1, c.err2))
    assert errs == sorted(errs, reverse=True)
    assert errs[0] > 1e-6 > errs[-1]


def test_infeasible_reports_best():
    with pytest.raises(RungeInfeasible) as info:
        blend_coefficient(PAIR, 1e-12, 24)
    best = info.value.best
    assert best is not None and not best.reached and best.degree <= 24


def test_overlap_rejected():
    with pytest.raises(RegionError):
        DisjointPair(Polydisc.ball(0j, 1.0), Polydisc.ball(1.5 + 0j, 1.0))


def test_piecewise_target():
    c = runge_piecewise(PAIR, PiecewiseTarget(z * z, SparsePoly.zero(1)), 1e-5)
    assert c.reached
    assert boundary_error_mp(c.p - z * z, 0.0, 0) <= c.err1
    assert boundary_error_mp(c.p, 8.0, 0) <= c.err2


def test_certify_sparse_known_max():
    b = certify_sparse(z ** 3 - z * Fraction(1, 2), Disc(0j, 1.0))
    # |z^3 - z/2| on the unit circle peaks at 3/2 (z = -1 or 1 gives 1/2; z = i gives 3/2)
    assert b.sample_max == pytest.approx(1.5)
    assert 1.5 <= b.bound < 1.6


def test_grid_sup_far_from_origin():
    p = (z - 1000) ** 40
    K = Polydisc.ball((1000 + 0j,), 0.5)
    assert grid_sup(p, K, GridSpec(9)) == pytest.approx(0.5 ** 40, rel=1e-9)


def test_orbit_error_exact_translation():
    f = (z - 10) ** 2
    curve = hypercyclic_orbit_error(f, 5, z * z, Polydisc.unit(1), range(0, 4))
    assert curve.argmin == 2 and curve.errors[2] == 0.0
    assert curve.to_csv().splitlines()[0] == "m,sup_error"


def test_birkhoff_conditions(birkhoff_run):
    f, g, sched, _ = birkhoff_run
    assert sched.all_hold()
    assert len(sched.conditions) == 12
    for st in sched.stages:
        assert st.contained
        assert st.m_odd >= st.escape and st.m_even > st.m_odd


def test_birkhoff_independent_orbit_check(birkhoff_run):
    f, g, sched, _ = birkhoff_run
    for st in sched.stages:
        for fn, m, target in ((f, st.m_odd, st.targets[0]), (g, st.m_even, st.targets[1])):
            moved = poly_translate(fn, [QQi(5 * m)])
            err = boundary_error_mp(moved - target, 0.0, 0, samples=256)
            assert err <= st.tolerance
