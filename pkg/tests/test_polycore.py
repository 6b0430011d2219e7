from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shearlab.polycore import (
    FLOAT,
    DegreeOverflowError,
    DimensionMismatch,
    NotDivisibleError,
    PolyError,
    PolyMap,
    QQi,
    SparsePoly,
    degree_limit,
    parse_poly,
    poly_compose,
    poly_derivative,
    poly_divide_exact,
    poly_eval_points,
    poly_from_json,
    poly_gcd_univariate,
    poly_to_json,
    poly_translate,
    sup_bound_polydisc,
)

I = QQi(0, 1)
z1, z2 = SparsePoly.variables(2)


def test_gaussian_rational_arithmetic():
    assert QQi(1, 2) * QQi(3, -1) == QQi(5, 5)
    assert QQi(1, 1) / QQi(1, -1) == I
    assert I ** 4 == QQi(1)
    assert QQi(Fraction(1, 3)) + Fraction(2, 3) == 1
    assert QQi(3, 4).abs2() == 25


def test_parse_matches_hand_expansion():
    p = parse_poly("(z1 + i*z2)^2 - 3/2", 2)
    assert p == z1 * z1 + z1 * z2 * QQi(0, 2) - z2 * z2 - Fraction(3, 2)
    assert p(QQi(1), QQi(1)) == QQi(Fraction(-3, 2), 2)


@pytest.mark.parametrize("bad", ["z1 / z2", "z3", "z1 ^ -1", "exp(z1)", "z1 +"])
def test_parse_rejects(bad):
    with pytest.raises(PolyError):
        parse_poly(bad, 2)


def test_translate_and_compose():
    assert poly_translate(z1 ** 2, [QQi(1), QQi(0)]) == z1 ** 2 + z1 * 2 + 1
    x = SparsePoly.var(0, 1)
    assert poly_compose(x ** 2 + 1, [z1 + z2]) == z1 ** 2 + z1 * z2 * 2 + z2 ** 2 + 1


def test_exact_division_and_gcd():
    assert poly_divide_exact(z1 ** 2 - z2 ** 2, z1 - z2) == z1 + z2
    with pytest.raises(NotDivisibleError):
        poly_divide_exact(z1 ** 2 + 1, z1)
    g = poly_gcd_univariate(SparsePoly.univariate([-1, 0, 1]), SparsePoly.univariate([1, 1]))
    assert g == SparsePoly.univariate([1, 1])


def test_degree_cap():
    x = SparsePoly.var(0, 1)
    with pytest.raises(DegreeOverflowError):
        x ** 600
    with degree_limit(2048):
        assert (x ** 600).degree == 600


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        z1 + SparsePoly.var(0, 3)


def test_sup_bound_dominates_samples():
    p = z1 ** 3 - z1 * z2 * 2 + z2 + QQi(0, 1)
    bound = sup_bound_polydisc(p, [0.5, -1j], [1.0, 0.5])
    rng = np.random.default_rng(1)
    r = np.sqrt(rng.uniform(0, 1, (500, 2))) * [1.0, 0.5]
    pts = np.array([0.5, -1j]) + r * np.exp(2j * np.pi * rng.uniform(0, 1, (500, 2)))
    assert np.max(np.abs(poly_eval_points(p, pts))) <= bound


def test_json_roundtrip_and_float_mode():
    p = parse_poly("3/7*z1^2*z2 - i", 2)
    assert poly_from_json(poly_to_json(p)) == p
    assert p.to_float().mode == FLOAT
    dyadic = parse_poly("3/8*z1^2*z2 - i", 2)
    assert dyadic.to_float().to_exact() == dyadic


def test_polymap_composition():
    F = PolyMap(2, (z2, -z1 + z2 ** 2))
    G = PolyMap(2, (z2 + z1 ** 2, -z1))
    assert F.compose(G).components == (-z1, -z2)
    assert F.compose(G)(QQi(1), QQi(2)) == F(*G(QQi(1), QQi(2)))


small = st.integers(-5, 5)
coeffs = st.lists(st.tuples(small, small), min_size=1, max_size=4)


def _from(cs):
    return SparsePoly.univariate([QQi(a, b) for a, b in cs])


@settings(max_examples=60, deadline=None)
@given(coeffs, coeffs, coeffs)
def test_ring_axioms(a, b, c):
    p, q, r = _from(a), _from(b), _from(c)
    assert (p + q) * r == p * r + q * r
    assert (p * q) * r == p * (q * r)
    assert p * q == q * p


@settings(max_examples=60, deadline=None)
@given(coeffs, coeffs)
def test_leibniz_rule(a, b):
    p, q = _from(a), _from(b)
    assert poly_derivative(p * q, 0) == poly_derivative(p, 0) * q + p * poly_derivative(q, 0)


@settings(max_examples=40, deadline=None)
@given(coeffs, small, small)
def test_translation_is_evaluation_shift(a, re, im):
    p = _from(a)
    s = QQi(re, im)
    moved = poly_translate(p, [s])
    for x in (QQi(0), QQi(1, -2), QQi(Fraction(1, 3), 1)):
        assert moved(x) == p(x + s)
def test_parse_strips_whitespace():
    assert parse_poly("  z1 + 1 ", 2) == z1 + 1
