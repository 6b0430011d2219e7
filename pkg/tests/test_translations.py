from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shearlab.polycore import QQi, SparsePoly, parse_poly
from shearlab.regions import (
    ConvexHull,
    GridSpec,
    Polydisc,
    RegionError,
    RegionUnion,
    polydisc_hull,
    region_from_json,
)
from shearlab.translations import (
    DanielewskiSurface,
    DiagonalTranslation,
    danielewski_cocycle_check,
    danielewski_power,
    danielewski_translation,
    escape_index,
    separation_certificate,
    surface_escape_probe,
    surface_sample,
    zajac_check,
)


def test_polydisc_basics():
    K = Polydisc.ball((0j, 1j), 2.0)
    assert K.dim == 2
    assert K.contains((1.0, 1j + 1.5))
    assert not K.contains((2.5, 0))
    assert region_from_json(K.to_json()) == K
    with pytest.raises(RegionError):
        Polydisc((0j,), (-1.0,))


def test_hull_contains_pieces():
    A, B = Polydisc.ball((0j,), 1.0), Polydisc.ball((5 + 0j,), 1.0)
    H = polydisc_hull([A, B], margin=0.5)
    assert H.contains_region(A) and H.contains_region(B)
    assert H.radii[0] == pytest.approx(4.0)


@pytest.mark.parametrize("b,r,expected", [(1, 1.0, 3), (5, 1.0, 1), (Fraction(1, 2), 1.0, 5), (1, 2.5, 6)])
def test_escape_index_oracle(b, r, expected):
    # translates of a polydisc of radius r by m*b are disjoint once m*b > 2r
    assert escape_index(DiagonalTranslation(2, b), Polydisc.ball((0j, 0j), r)) == expected


def test_zajac_threshold():
    tau = DiagonalTranslation(2, 1)
    K = Polydisc.unit(2)
    good, bad = zajac_check(tau, K, 3), zajac_check(tau, K, 2)
    assert good.holds and good.escape.disjoint and good.separation.separated
    assert not bad.holds and not bad.escape.disjoint
    assert good.separation.sup_first < good.separation.threshold < good.separation.inf_second
    assert "separation" in good.to_json() and "escape" in bad.to_json()


def test_zajac_rejects_nonconvex():
    U = RegionUnion((Polydisc.unit(2), Polydisc.ball((4 + 0j, 0j), 1.0)))
    with pytest.raises(RegionError):
        zajac_check(DiagonalTranslation(2, 1), U, 5)


def test_separation_of_hulls():
    A = ConvexHull(((0j, 0j), (1 + 0j, 1j)))
    B = A.translate((3 + 0j, 0j))
    cert = separation_certificate(A, B)
    assert cert.separated and cert.gap > 0
    assert not separation_certificate(A, A.translate((0.5, 0.5j))).separated


P = parse_poly("z^2 - 1", 1, ["z"])


def test_danielewski_oracles():
    S = DanielewskiSurface(P)
    t = danielewski_translation(S, 1)
    assert t.invariance_residual().is_zero()
    assert t(QQi(1), QQi(0), QQi(1)) == (QQi(1), QQi(3), QQi(2))
    x, y, z = SparsePoly.variables(3)
    # q = (p(z + x) - p(z)) / x = x + 2z
    assert t.q == x + z * 2


def test_danielewski_rejects_repeated_roots():
    with pytest.raises(ValueError):
        DanielewskiSurface(parse_poly("(z - 1)^2", 1, ["z"]))


def test_power_matches_scaled_translation():
    S = DanielewskiSurface(P)
    assert danielewski_power(S, 1, 3) == danielewski_translation(S, 3).map


rationals = st.fractions(min_value=-5, max_value=5, max_denominator=7).filter(bool)


@settings(max_examples=15, deadline=None)
@given(rationals, rationals)
def test_cocycle_property(a, b):
    if a + b == 0:
        return
    assert danielewski_cocycle_check(DanielewskiSurface(P), a, b).holds


def test_escape_probe_increasing():
    S = DanielewskiSurface(P)
    pts = surface_sample(S, 50, seed=0)
    assert len(pts) == 50
    curve = surface_escape_probe(S, 1, pts, range(0, 13))
    assert curve.values[0] == 0.0
    assert curve.strictly_increasing_from(2)
    assert curve.to_csv().startswith("m,min_distance\n0,")


def test_escape_probe_rejects_off_surface():
    with pytest.raises(ValueError):
        surface_escape_probe(DanielewskiSurface(P), 1, [(1, 1, 1)], [1])


def test_diagonal_translation_rejects_complex():
    with pytest.raises(ValueError):
        DiagonalTranslation(2, 1j)
    with pytest.raises(ValueError):
        DiagonalTranslation(2, -1)


def test_translation_points():
    tau = DiagonalTranslation(3, Fraction(1, 2))
    pts = np.zeros((2, 3), dtype=complex)
    assert np.allclose(tau.apply(pts, 4), 2.0)
    assert GridSpec(5).points == 5
