from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shearlab.polycore import FLOAT, DimensionMismatch, QQi, SparsePoly
from shearlab.regions import GridSpec, Polydisc
from shearlab.shearcalc import (
    AutWord,
    ExpPoly,
    NotRepresentableError,
    SemiSymbolicMap,
    compose,
    enumerate_reduced_words,
    identity_suite,
    invert,
    jacobian_det,
    make_cyclic_I,
    make_F,
    make_shear,
    margin_report,
    reduce_word,
    reduced_word_count,
    transposition_audit,
    verify_identity,
    word_margin,
)
from shearlab.translations import DiagonalTranslation


def power(M, k):
    out = SemiSymbolicMap.identity(M.n if hasattr(M, "n") else len(M.components))
    for _ in range(k):
        out = compose(M, out)
    return out


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_cyclic_map_relations(n):
    I = make_cyclic_I(n).map
    ident = SemiSymbolicMap.identity(n)
    z = SparsePoly.variables(n)
    sign = -((-1) ** n)
    assert power(I, 2 * n) == ident
    assert power(I, n) == SemiSymbolicMap([v * sign for v in z])
    assert invert(make_cyclic_I(n)) == power(I, 2 * n - 1)


def test_cyclic_map_n2_explicit():
    z1, z2 = SparsePoly.variables(2)
    assert make_cyclic_I(2).map == SemiSymbolicMap([z2, -z1])


def test_overshear_components_n3():
    # n = 3: F(z) = (z2, z3, e^f z1 + g + 2 z3) with f = z2, g = z3^2
    w1, w2 = SparsePoly.variables(2)
    F = make_F(3, w1, w2 ** 2)
    moved = F.map.evaluate(np.array([[1.0, 0.0, -1.0]], dtype=complex))
    assert moved[0] == pytest.approx([0.0, -1.0, 0.0])
    moved = F.map.evaluate(np.array([[2.0, 1.0, 0.0]], dtype=complex))
    assert moved[0] == pytest.approx([1.0, 0.0, 2.0 * np.e])


def test_overshear_inverse_roundtrip():
    w = SparsePoly.variables(2)
    F = make_F(3, w[0] * Fraction(1, 2), w[1] ** 2 - w[0])
    pts = np.array([[0.3, -0.2j, 0.1 + 0.4j], [1.0, 0.5, -0.5]], dtype=complex)
    back = F.inverse_map.evaluate(F.map.evaluate(pts))
    assert np.allclose(back, pts)


def test_shear_jacobian_is_one():
    z2 = SparsePoly.var(0, 1)
    S = make_shear(2, z2 ** 3 - z2)
    T = make_shear(2, z2 ** 2, A=((0, 1), (-1, 0)))
    assert jacobian_det(compose(S, T)) == ExpPoly.constant(1, 2)


def test_overshear_jacobian_is_exponential():
    w = SparsePoly.var(0, 1)
    F = make_F(2, w, SparsePoly.zero(1))
    det = jacobian_det(F)
    assert not det.is_polynomial()
    assert det.evaluate(np.array([[0.0, 0.0]]))[0] == pytest.approx(1.0)


def test_decomposition_n2():
    w = SparsePoly.var(0, 1)
    f, g = w * Fraction(1, 3), w ** 2 - 1
    lhs = compose(make_F(2, SparsePoly.zero(1), g), compose(invert(make_cyclic_I(2)), make_F(2, f, SparsePoly.zero(1))))
    assert lhs == make_F(2, f, g).map


def test_transposition_audit():
    audit = transposition_audit()
    printed, alt = audit["printed_certificate"], audit["alternative_certificate"]
    assert not printed.verdict and printed.counterexample is not None
    # A^-1 B A sends (1, 0) to (0, 1) while t sends it to (0, -1)
    assert printed.counterexample["lhs"] == [[0.0, 0.0], [1.0, 0.0]]
    assert printed.counterexample["rhs"] == [[0.0, 0.0], [-1.0, 0.0]]
    assert alt.verdict and alt.method == "symbolic"
    z1, z2 = SparsePoly.variables(2)
    assert audit["alternative"] == SemiSymbolicMap([z2, -z1])


def test_verify_identity_float_mode():
    z1, z2 = SparsePoly.variables(2, FLOAT)
    a = SemiSymbolicMap([z1, z2 + z1 ** 2])
    b = SemiSymbolicMap([z1, z2 + z1 * z1])
    cert = verify_identity(a, b, Polydisc.unit(2))
    assert cert.verdict


@pytest.mark.parametrize("rank,length,count", [(1, 3, 6), (2, 4, 160), (3, 2, 36)])
def test_reduced_word_counts(rank, length, count):
    assert reduced_word_count(rank, length) == count


def test_enumeration_matches_closed_form():
    tau = DiagonalTranslation(2, 1)
    F = make_F(2, SparsePoly.zero(1), SparsePoly.var(0, 1) ** 2)
    words = enumerate_reduced_words({"tau": tau, "F": F}, 4)
    assert len(words) == 160 == len({w.letters for w in words})
    assert all(w.is_reduced() and 1 <= w.length <= 4 for w in words)


def test_reduce_word():
    tau = DiagonalTranslation(2, 1)
    w = AutWord({"tau": tau}, (("tau", 2), ("tau", -2)))
    assert reduce_word(w).letters == ()


def test_word_margins():
    tau = DiagonalTranslation(2, 1)
    w = AutWord({"tau": tau}, (("tau", 1),))
    assert word_margin(w, Polydisc.unit(2), GridSpec(5)) == pytest.approx(np.sqrt(2))
    swap = make_cyclic_I(2)
    rep = margin_report(AutWord({"I": swap}, (("I", 4),)), Polydisc.unit(2), GridSpec(5))
    assert rep.value == pytest.approx(0.0, abs=1e-12)


def test_autword_dimension_check():
    with pytest.raises(DimensionMismatch):
        AutWord({"a": DiagonalTranslation(2, 1), "b": DiagonalTranslation(3, 1)})


def test_exppoly_not_representable():
    e = ExpPoly.exp(SparsePoly.var(0, 1))
    with pytest.raises(NotRepresentableError):
        e.as_poly()


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_identity_suite(n):
    checks = identity_suite(n, seed=3)
    assert checks and all(c.holds for c in checks), [c for c in checks if not c.holds]


small = st.integers(-4, 4)


@settings(max_examples=20, deadline=None)
@given(st.lists(small, min_size=1, max_size=4), st.lists(small, min_size=1, max_size=3))
def test_shear_inverse_property(cs, ds):
    g = SparsePoly.univariate([QQi(c) for c in cs])
    A = ((1, Fraction(sum(ds), 5)), (0, 1))
    S = make_shear(2, g, A=A)
    assert compose(S.map, S.inverse_map) == SemiSymbolicMap.identity(2)


letters = st.lists(st.tuples(st.sampled_from(["tau", "F"]), st.integers(-2, 2)), max_size=8)


@settings(max_examples=80, deadline=None)
@given(letters)
def test_reduce_word_idempotent(seq):
    tau = DiagonalTranslation(2, 1)
    F = make_F(2, SparsePoly.zero(1), SparsePoly.var(0, 1) ** 2)
    w = AutWord({"tau": tau, "F": F}, tuple(seq))
    r = reduce_word(w)
    assert reduce_word(r) == r
    assert r.length <= w.length


def test_margin_monotone_in_compact():
    tau = DiagonalTranslation(2, 1)
    F = make_F(2, SparsePoly.zero(1), SparsePoly.var(0, 1) ** 2)
    w = AutWord({"tau": tau, "F": F}, (("F", 1), ("tau", 1)))
    small = word_margin(w, Polydisc.ball((0j, 0j), 0.5), GridSpec(5))
    large = word_margin(w, Polydisc.ball((0j, 0j), 1.0), GridSpec(5))
    assert large >= small
