"""Shears, overshears and words in them.

Maps are :class:`SemiSymbolicMap` objects whose components are finite sums
``sum_q P_q * exp(q)`` with polynomial ``P_q`` and pairwise distinct
polynomial exponents ``q``.  Exponentials of distinct polynomials are
linearly independent over the polynomial ring, so this representation is
canonical and equality of maps is decided by comparing dictionaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence, Union

import mpmath
import numpy as np

from .polycore import (
    EXACT,
    DimensionMismatch,
    ModeMismatch,
    PolyMap,
    QQi,
    SparsePoly,
    poly_compose,
    poly_derivative,
    poly_eval,
    poly_eval_points,
    poly_eval_with,
    poly_from_json,
    poly_to_json,
)
from .regions import GridSpec, Polydisc, Region
from .translations import DiagonalTranslation


class NotRepresentableError(ValueError):
    """A composition would put a non-polynomial expression inside ``exp``."""


# ---------------------------------------------------------------------------
# Exponential polynomials


class ExpPoly:
    """Finite sum ``sum_q P_q * exp(q)`` of polynomials in ``n`` variables."""

    __slots__ = ("n", "mode", "_terms", "_float_cache", "_hash")

    def __init__(self, n: int, terms: Mapping | Iterable = (), mode: str = EXACT):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        for q, P in items:
            if q.nvars != n or P.nvars != n:
                raise DimensionMismatch("exponent and coefficient must use n variables")
            if q.mode != mode or P.mode != mode:
                raise ModeMismatch("mixed coefficient modes")
            acc[q] = acc[q] + P if q in acc else P
        self._set(n, mode, {q: P for q, P in acc.items() if not P.is_zero()})

    def _set(self, n, mode, terms):
        self.n = n
        self.mode = mode
        self._terms = terms
        self._float_cache = None
        self._hash = None

    @classmethod
    def _raw(cls, n, terms, mode) -> "ExpPoly":
        obj = object.__new__(cls)
        obj._set(n, mode, terms)
        return obj

    @classmethod
    def from_poly(cls, p: SparsePoly) -> "ExpPoly":
        if p.is_zero():
            return cls._raw(p.nvars, {}, p.mode)
        return cls._raw(p.nvars, {SparsePoly.zero(p.nvars, p.mode): p}, p.mode)

    @classmethod
    def constant(cls, c, n: int, mode: str = EXACT) -> "ExpPoly":
        return cls.from_poly(SparsePoly.constant(c, n, mode))

    @classmethod
    def exp(cls, q: SparsePoly) -> "ExpPoly":
        return cls._raw(q.nvars, {q: SparsePoly.constant(1, q.nvars, q.mode)}, q.mode)

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self) -> list:
        return sorted(self._terms.items(), key=lambda t: [(sum(e), e, str(c)) for e, c in t[0].items()])

    def is_polynomial(self) -> bool:
        return all(q.is_zero() for q in self._terms)

    def as_poly(self) -> SparsePoly:
        if not self.is_polynomial():
            raise NotRepresentableError("expression contains exponential factors")
        if not self._terms:
            return SparsePoly.zero(self.n, self.mode)
        return next(iter(self._terms.values()))

    def is_zero(self) -> bool:
        return not self._terms

    def __eq__(self, other):
        if isinstance(other, ExpPoly):
            return self.n == other.n and self.mode == other.mode and self._terms == other._terms
        if isinstance(other, SparsePoly):
            return self == ExpPoly.from_poly(other)
        if isinstance(other, (int, QQi)):
            return self == ExpPoly.constant(other, self.n, self.mode)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        other = self._lift(other)
        terms = dict(self._terms)
        for q, P in other._terms.items():
            if q in terms:
                s = terms[q] + P
                if s.is_zero():
                    del terms[q]
                else:
                    terms[q] = s
            else:
                terms[q] = P
        return ExpPoly._raw(self.n, terms, self.mode)

    __radd__ = __add__

    def __neg__(self) -> "ExpPoly":
        return ExpPoly._raw(self.n, {q: -P for q, P in self._terms.items()}, self.mode)

    def __sub__(self, other) -> "ExpPoly":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "ExpPoly":
        return self._lift(other) - self

    def __mul__(self, other) -> "ExpPoly":
        other = self._lift(other)
        terms: dict = {}
        for q1, P1 in self._terms.items():
            for q2, P2 in other._terms.items():
                q = q1 + q2
                P = P1 * P2
                terms[q] = terms[q] + P if q in terms else P
        return ExpPoly._raw(self.n, {q: P for q, P in terms.items() if not P.is_zero()}, self.mode)

    __rmul__ = __mul__

    def _lift(self, other) -> "ExpPoly":
        if isinstance(other, ExpPoly):
            if other.n != self.n:
                raise DimensionMismatch("expressions in different variable counts")
            if other.mode != self.mode:
                raise ModeMismatch("mixed coefficient modes")
            return other
        if isinstance(other, SparsePoly):
            return ExpPoly.from_poly(other)
        return ExpPoly.constant(other, self.n, self.mode)

    def times_exp(self, q: SparsePoly) -> "ExpPoly":
        if q.is_zero():
            return self
        return ExpPoly._raw(self.n, {k + q: P for k, P in self._terms.items()}, self.mode)

    def derivative(self, var: int) -> "ExpPoly":
        out = ExpPoly._raw(self.n, {}, self.mode)
        for q, P in self._terms.items():
            d = poly_derivative(P, var) + P * poly_derivative(q, var)
            if not d.is_zero():
                out = out + ExpPoly._raw(self.n, {q: d}, self.mode)
        return out

    def compose(self, args: Sequence["ExpPoly"]) -> "ExpPoly":
        """Substitute ``args[i]`` for variable ``i``.

        Exponents must remain polynomial: a variable occurring in some exponent
        ``q`` may only be replaced by an exponential-free expression.
        """
        if len(args) != self.n:
            raise DimensionMismatch(f"{self.n} arguments expected")
        m = args[0].n if args else self.n
        polys = [a.as_poly() if a.is_polynomial() else None for a in args]
        zero = SparsePoly.zero(m, self.mode)
        out = ExpPoly._raw(m, {}, self.mode)
        powers: list[dict[int, ExpPoly]] = [{} for _ in args]

        def power(i, k):
            table = powers[i]
            if k not in table:
                acc = ExpPoly.constant(1, m, self.mode)
                for j in range(1, k + 1):
                    acc = table[j] if j in table else acc * args[i]
                    table[j] = acc
            return table[k]

        for q, P in self._terms.items():
            for i in range(self.n):
                if q.depends_on(i) and polys[i] is None:
                    raise NotRepresentableError(
                        "an exponent would acquire an exponential argument; "
                        "such compositions leave the represented class"
                    )
            new_q = poly_compose(q, [p if p is not None else zero for p in polys]) if not q.is_zero() else zero
            needed = [i for i in range(self.n) if P.depends_on(i)]
            if all(polys[i] is not None for i in needed):
                new_P = ExpPoly.from_poly(
                    poly_compose(P, [p if p is not None else zero for p in polys]))
            else:
                new_P = ExpPoly._raw(m, {}, self.mode)
                for e, c in P.items():
                    term = ExpPoly.constant(c, m, self.mode)
                    for i, k in enumerate(e):
                        if k:
                            term = term * power(i, k)
                    new_P = new_P + term
            out = out + new_P.times_exp(new_q)
        return out

    # numeric evaluation ----------------------------------------------------
    def _float_terms(self):
        if self._float_cache is None:
            self._float_cache = [(q.to_float(), P.to_float()) for q, P in self._terms.items()]
        return self._float_cache

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Float evaluation at the rows of an ``(N, n)`` array."""
        pts = np.asarray(points, dtype=complex)
        out = np.zeros(pts.shape[0], complex)
        with np.errstate(all="ignore"):
            for q, P in self._float_terms():
                val = poly_eval_points(P, pts)
                if not q.is_zero():
                    val = val * np.exp(poly_eval_points(q, pts))
                out = out + val
        return out

    def evaluate_mp(self, point: Sequence) -> mpmath.mpc:
        """Evaluation in mpmath at the current working precision."""
        total = mpmath.mpc(0)
        for q, P in self._terms.items():
            val = _mp_poly(P, point)
            if not q.is_zero():
                val = val * mpmath.exp(_mp_poly(q, point))
            total += val
        return total

    def evaluate_exact(self, point: Sequence) -> QQi:
        if not self.is_polynomial():
            raise NotRepresentableError("exact evaluation needs an exponential-free expression")
        return poly_eval(self.as_poly(), point)

    def to_json(self) -> list:
        return [[poly_to_json(q), poly_to_json(P)] for q, P in self.items()]

    @classmethod
    def from_json(cls, n: int, data: list, mode: str = EXACT) -> "ExpPoly":
        return cls(n, [(poly_from_json(q), poly_from_json(P)) for q, P in data], mode)

    def __repr__(self):
        parts = []
        for q, P in self.items():
            parts.append(f"({P})" if q.is_zero() else f"({P})*exp({q})")
        return " + ".join(parts) or "0"


def _mp_number(c):
    if isinstance(c, QQi):
        return mpmath.mpc(mpmath.mpf(c.re.numerator) / c.re.denominator,
                          mpmath.mpf(c.im.numerator) / c.im.denominator)
    return mpmath.mpc(c)


def _mp_poly(p: SparsePoly, point: Sequence):
    return poly_eval_with(p, point, _mp_number, mpmath.mpc(0))


# ---------------------------------------------------------------------------
# Maps


class SemiSymbolicMap:
    """A self-map of complex ``n``-space with :class:`ExpPoly` components."""

    __slots__ = ("n", "components", "__weakref__")

    def __init__(self, components: Sequence[ExpPoly | SparsePoly]):
        comps = tuple(c if isinstance(c, ExpPoly) else ExpPoly.from_poly(c) for c in components)
        n = len(comps)
        if n == 0:
            raise DimensionMismatch("a map needs at least one component")
        for c in comps:
            if c.n != n:
                raise DimensionMismatch("every component must use n variables")
        if len({c.mode for c in comps}) > 1:
            raise ModeMismatch("components of mixed coefficient modes")
        self.n = n
        self.components = comps

    @property
    def mode(self) -> str:
        return self.components[0].mode

    @classmethod
    def identity(cls, n: int, mode: str = EXACT) -> "SemiSymbolicMap":
        return cls(SparsePoly.variables(n, mode))

    @classmethod
    def from_polymap(cls, F: PolyMap) -> "SemiSymbolicMap":
        return cls(F.components)

    @classmethod
    def linear(cls, matrix, mode: str = EXACT) -> "SemiSymbolicMap":
        return cls(PolyMap.linear(matrix, mode).components)

    @classmethod
    def translation(cls, shift: Sequence, mode: str = EXACT) -> "SemiSymbolicMap":
        zs = SparsePoly.variables(len(shift), mode)
        return cls([z + s for z, s in zip(zs, shift)])

    def is_polynomial(self) -> bool:
        return all(c.is_polynomial() for c in self.components)

    def to_polymap(self) -> PolyMap:
        return PolyMap(self.n, tuple(c.as_poly() for c in self.components))

    def compose(self, other: "SemiSymbolicMap") -> "SemiSymbolicMap":
        """``self`` after ``other``."""
        if other.n != self.n:
            raise DimensionMismatch("maps of different dimension")
        return SemiSymbolicMap([c.compose(other.components) for c in self.components])

    def __matmul__(self, other: "SemiSymbolicMap") -> "SemiSymbolicMap":
        return self.compose(other)

    def __eq__(self, other):
        if not isinstance(other, SemiSymbolicMap):
            return NotImplemented
        return self.n == other.n and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        return "SemiSymbolicMap(" + ", ".join(repr(c) for c in self.components) + ")"

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=complex))
        return np.stack([c.evaluate(pts) for c in self.components], axis=1)

    def evaluate_mp(self, point: Sequence) -> list:
        return [c.evaluate_mp(point) for c in self.components]

    def evaluate_exact(self, point: Sequence) -> tuple:
        return tuple(c.evaluate_exact(point) for c in self.components)

    def jacobian_matrix(self) -> list[list[ExpPoly]]:
        return [[c.derivative(j) for j in range(self.n)] for c in self.components]

    def to_json(self) -> dict:
        return {"n": self.n, "mode": self.mode, "components": [c.to_json() for c in self.components]}

    @classmethod
    def from_json(cls, data: Mapping) -> "SemiSymbolicMap":
        n = int(data["n"])
        mode = data.get("mode", EXACT)
        return cls([ExpPoly.from_json(n, c, mode) for c in data["components"]])


def _determinant(rows: list[list]) -> object:
    """Laplace expansion with memoised minors (entries support + - *)."""
    n = len(rows)
    memo: dict = {}

    def det(r: int, cols: tuple):
        if r == n:
            return None
        key = (r, cols)
        if key in memo:
            return memo[key]
        total = None
        for idx, c in enumerate(cols):
            entry = rows[r][c]
            if entry.is_zero():
                continue
            minor = det(r + 1, cols[:idx] + cols[idx + 1:])
            term = entry if minor is None else entry * minor
            if idx % 2:
                term = -term
            total = term if total is None else total + term
        if total is None:
            total = rows[0][0] - rows[0][0]
        memo[key] = total
        return total

    return det(0, tuple(range(n)))


def jacobian_det(m: SemiSymbolicMap | "OvershearGen" | "AutWord") -> ExpPoly:
    """Symbolic determinant of the differential."""
    return _determinant(as_map(m).jacobian_matrix())


# ---------------------------------------------------------------------------
# Matrices


def _matrix(A, n: int, mode: str):
    if A is None:
        one = QQi(1) if mode == EXACT else 1 + 0j
        zero = QQi(0) if mode == EXACT else 0j
        return tuple(tuple(one if i == j else zero for j in range(n)) for i in range(n))
    rows = tuple(tuple(A[i]) for i in range(len(A)))
    if len(rows) != n or any(len(r) != n for r in rows):
        raise DimensionMismatch(f"conjugator must be {n}x{n}")
    if mode == EXACT:
        return tuple(tuple(QQi.coerce(x) for x in r) for r in rows)
    return tuple(tuple(complex(x) for x in r) for r in rows)


def _exact_inverse(A) -> tuple[tuple[QQi, ...], ...]:
    n = len(A)
    M = [list(r) + [QQi(1) if i == j else QQi(0) for j in range(n)] for i, r in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col]), None)
        if piv is None:
            raise ValueError("singular conjugator")
        M[col], M[piv] = M[piv], M[col]
        inv = QQi(1) / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return tuple(tuple(r[n:]) for r in M)


def _exact_det(A) -> QQi:
    M = [list(r) for r in A]
    n = len(M)
    det = QQi(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col]), None)
        if piv is None:
            return QQi(0)
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det = det * M[col][col]
        inv = QQi(1) / M[col][col]
        for r in range(col + 1, n):
            if M[r][col]:
                f = M[r][col] * inv
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return det


# ---------------------------------------------------------------------------
# Generators


@dataclass(frozen=True)
class OvershearGen:
    """``A^-1 o G_(f,g) o A`` (composed with the cyclic map when ``twisted``).

    ``G_(f,g)(w) = (w_1, ..., w_(n-1), exp(f(w')) * w_n + g(w'))`` acts on the
    last coordinate; ``f`` and ``g`` are polynomials in the first ``n - 1``
    variables and ``A`` has determinant one.  ``f = 0`` gives a shear.
    """

    n: int
    f: SparsePoly
    g: SparsePoly
    A: tuple | None = None
    twisted: bool = False
    name: str = ""

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("overshears need dimension at least 2")
        for p in (self.f, self.g):
            if p.nvars != self.n - 1:
                raise DimensionMismatch(f"f and g must be polynomials in {self.n - 1} variables")
        if self.f.mode != self.g.mode:
            raise ModeMismatch("f and g must share the coefficient mode")
        A = _matrix(self.A, self.n, self.mode)
        if self.mode == EXACT:
            if _exact_det(A) != 1:
                raise ValueError("conjugating matrix must have determinant 1")
        elif abs(np.linalg.det(np.array(A)) - 1) >= 1e-12:
            raise ValueError("conjugating matrix must have determinant 1")
        object.__setattr__(self, "A", A)

    @property
    def mode(self) -> str:
        return self.f.mode

    @property
    def is_shear(self) -> bool:
        return self.f.is_zero()

    def _A_inv(self):
        if self.mode == EXACT:
            return _exact_inverse(self.A)
        return tuple(tuple(complex(x) for x in r) for r in np.linalg.inv(np.array(self.A)))

    def _is_identity_A(self) -> bool:
        return all((self.A[i][j] == (1 if i == j else 0)) for i in range(self.n) for j in range(self.n))

    def _G(self, inverse: bool = False) -> SemiSymbolicMap:
        n, mode = self.n, self.mode
        zs = SparsePoly.variables(n, mode)
        f = self.f.embed(n, list(range(n - 1)))
        g = self.g.embed(n, list(range(n - 1)))
        if inverse:
            last = ExpPoly.from_poly(zs[-1] - g).times_exp(-f)
        else:
            last = ExpPoly.from_poly(zs[-1]).times_exp(f) + ExpPoly.from_poly(g)
        return SemiSymbolicMap([ExpPoly.from_poly(z) for z in zs[:-1]] + [last])

    def _cyclic(self, inverse: bool = False) -> SemiSymbolicMap:
        return _cyclic_map(self.n, self.mode, inverse)

    @cached_property
    def map(self) -> SemiSymbolicMap:
        core = self._G()
        if not self._is_identity_A():
            A = SemiSymbolicMap.linear(self.A, self.mode)
            Ainv = SemiSymbolicMap.linear(self._A_inv(), self.mode)
            core = Ainv.compose(core.compose(A))
        return core.compose(self._cyclic()) if self.twisted else core

    @cached_property
    def inverse_map(self) -> SemiSymbolicMap:
        core = self._G(inverse=True)
        if not self._is_identity_A():
            A = SemiSymbolicMap.linear(self.A, self.mode)
            Ainv = SemiSymbolicMap.linear(self._A_inv(), self.mode)
            core = Ainv.compose(core.compose(A))
        return self._cyclic(inverse=True).compose(core) if self.twisted else core

    def to_json(self) -> dict:
        A = [[[str(x.re), str(x.im)] if self.mode == EXACT else [x.real, x.imag] for x in r]
             for r in self.A]
        return {
            "type": "overshear",
            "n": self.n,
            "A": A,
            "f": poly_to_json(self.f),
            "g": poly_to_json(self.g),
            "twisted": self.twisted,
            "name": self.name,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "OvershearGen":
        f = poly_from_json(data["f"])
        g = poly_from_json(data["g"])
        if f.mode == EXACT:
            A = [[QQi(x[0], x[1]) for x in r] for r in data["A"]]
        else:
            A = [[complex(x[0], x[1]) for x in r] for r in data["A"]]
        return cls(int(data["n"]), f, g, A, bool(data.get("twisted", False)), data.get("name", ""))


def _cyclic_map(n: int, mode: str, inverse: bool = False) -> SemiSymbolicMap:
    zs = SparsePoly.variables(n, mode)
    sign = 1 if n % 2 else -1  # -(-1)^n
    if inverse:
        return SemiSymbolicMap([zs[-1] * sign] + zs[:-1])
    return SemiSymbolicMap(zs[1:] + [zs[0] * sign])


def make_cyclic_I(n: int, mode: str = EXACT) -> OvershearGen:
    """``I(z) = (z_2, ..., z_n, -(-1)^n z_1)``."""
    if n < 2:
        raise ValueError("the cyclic map needs n >= 2")
    zero = SparsePoly.zero(n - 1, mode)
    return OvershearGen(n, zero, zero, None, True, "I")


def make_F(n: int, f: SparsePoly, g: SparsePoly, name: str = "F") -> OvershearGen:
    """Twisted overshear ``(z_2..z_n, -(-1)^n e^f z_1 + g + (1 - (-1)^n) z_n)``.

    ``f`` and ``g`` are functions of ``(z_2, ..., z_n)``, passed as polynomials
    in ``n - 1`` variables.  As a generator this is ``G_(f, g~) o I`` with
    ``g~ = g + (1 - (-1)^n) w_(n-1)``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if f.nvars != n - 1 or g.nvars != n - 1:
        raise DimensionMismatch(f"f and g must be polynomials in {n - 1} variables")
    g_full = g
    if n % 2:
        g_full = g + SparsePoly.var(n - 2, n - 1, g.mode) * 2
    return OvershearGen(n, f, g_full, None, True, name)


def make_shear(n: int, g: SparsePoly, A=None, name: str = "") -> OvershearGen:
    return OvershearGen(n, SparsePoly.zero(n - 1, g.mode), g, A, False, name)


# ---------------------------------------------------------------------------
# Words

Generator = Union[OvershearGen, DiagonalTranslation]


def _letter_map(gen: Generator, e: int) -> SemiSymbolicMap:
    if isinstance(gen, DiagonalTranslation):
        return SemiSymbolicMap(gen.polymap(e).components)
    base = gen.map if e > 0 else gen.inverse_map
    out = base
    for _ in range(abs(e) - 1):
        out = base.compose(out)
    return out


@dataclass(frozen=True)
class AutWord:
    """Product ``l_1 o l_2 o ... o l_k`` of generator powers (rightmost acts first)."""

    alphabet: tuple
    letters: tuple = ()

    def __post_init__(self):
        alpha = tuple(self.alphabet.items()) if isinstance(self.alphabet, Mapping) else tuple(
            tuple(x) for x in self.alphabet)
        names = [a for a, _ in alpha]
        if len(set(names)) != len(names):
            raise ValueError("generator names must be unique")
        dims = {g.n for _, g in alpha}
        if len(dims) > 1:
            raise DimensionMismatch("generators act on different dimensions")
        letters = tuple((str(a), int(e)) for a, e in self.letters)
        for a, e in letters:
            if a not in names:
                raise ValueError(f"unknown generator {a!r}")
        object.__setattr__(self, "alphabet", alpha)
        object.__setattr__(self, "letters", letters)

    @property
    def generators(self) -> dict:
        return dict(self.alphabet)

    @property
    def n(self) -> int:
        return self.alphabet[0][1].n

    @property
    def length(self) -> int:
        return sum(abs(e) for _, e in self.letters)

    def is_reduced(self) -> bool:
        return all(e for _, e in self.letters) and all(
            a != b for (a, _), (b, _) in zip(self.letters, self.letters[1:]))

    def with_letters(self, letters) -> "AutWord":
        return AutWord(self.alphabet, tuple(letters))

    def to_map(self) -> SemiSymbolicMap:
        gens = self.generators
        out = SemiSymbolicMap.identity(self.n, _alphabet_mode(self.alphabet))
        for name, e in reversed(self.letters):
            if e:
                out = _letter_map(gens[name], e).compose(out)
        return out

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Float evaluation, one generator application at a time."""
        gens = self.generators
        pts = np.asarray(points, dtype=complex)
        with np.errstate(all="ignore"):
            for name, e in reversed(self.letters):
                pts = _apply_power(gens[name], e, pts)
        return pts

    def apply_mp(self, point: Sequence) -> list:
        gens = self.generators
        pt = [mpmath.mpc(x) for x in point]
        for name, e in reversed(self.letters):
            gen = gens[name]
            if isinstance(gen, DiagonalTranslation):
                s = mpmath.mpf(gen.b_exact.numerator) / gen.b_exact.denominator * e
                pt = [x + s for x in pt]
                continue
            M = gen.map if e > 0 else gen.inverse_map
            for _ in range(abs(e)):
                pt = M.evaluate_mp(pt)
        return pt

    def to_json(self) -> dict:
        return {
            "alphabet": [{"name": a, "generator": g.to_json()} for a, g in self.alphabet],
            "letters": [[a, e] for a, e in self.letters],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "AutWord":
        alpha = []
        for entry in data["alphabet"]:
            g = entry["generator"]
            if g.get("type") == "translation":
                from fractions import Fraction

                gen = DiagonalTranslation(int(g["n"]), Fraction(g["b"]))
            else:
                gen = OvershearGen.from_json(g)
            alpha.append((entry["name"], gen))
        return cls(tuple(alpha), tuple((a, e) for a, e in data["letters"]))

    def __str__(self):
        if not self.letters:
            return "id"
        return " ".join(a if e == 1 else f"{a}^{e}" for a, e in self.letters)


def _alphabet_mode(alphabet) -> str:
    for _, g in alphabet:
        if isinstance(g, OvershearGen):
            return g.mode
    return EXACT


def _apply_power(gen: Generator, e: int, pts: np.ndarray) -> np.ndarray:
    if isinstance(gen, DiagonalTranslation):
        return gen.apply(pts, e)
    M = gen.map if e > 0 else gen.inverse_map
    for _ in range(abs(e)):
        pts = M.evaluate(pts)
    return pts


def reduce_word(w: AutWord) -> AutWord:
    """Free reduction: merge equal neighbours, drop zero exponents."""
    stack: list[list] = []
    for a, e in w.letters:
        if not e:
            continue
        if stack and stack[-1][0] == a:
            stack[-1][1] += e
            if not stack[-1][1]:
                stack.pop()
        else:
            stack.append([a, e])
    return w.with_letters(tuple((a, e) for a, e in stack))


def enumerate_reduced_words(alphabet, max_length: int) -> list[AutWord]:
    """All nonempty reduced words of length ``<= max_length`` (length = sum of |exponents|).

    Words are produced in order of length, then lexicographically in the
    unit-letter sequence ``(name, +-1)``.
    """
    base = AutWord(alphabet)
    names = [a for a, _ in base.alphabet]
    units = [(a, s) for a in names for s in (1, -1)]
    words: list[AutWord] = []
    frontier: list[tuple] = [()]
    for _ in range(max_length):
        nxt = []
        for seq in frontier:
            for u in units:
                if seq and seq[-1][0] == u[0] and seq[-1][1] == -u[1]:
                    continue
                nxt.append(seq + (u,))
        frontier = nxt
        words.extend(reduce_word(base.with_letters(seq)) for seq in frontier)
    return words


def reduced_word_count(rank: int, max_length: int) -> int:
    """Closed form: ``2r (2r-1)^(l-1)`` reduced words of each length ``l``."""
    return sum(2 * rank * (2 * rank - 1) ** (l - 1) for l in range(1, max_length + 1))


def as_map(x) -> SemiSymbolicMap:
    if isinstance(x, SemiSymbolicMap):
        return x
    if isinstance(x, OvershearGen):
        return x.map
    if isinstance(x, AutWord):
        return x.to_map()
    if isinstance(x, DiagonalTranslation):
        return SemiSymbolicMap(x.polymap(1).components)
    if isinstance(x, PolyMap):
        return SemiSymbolicMap.from_polymap(x)
    raise TypeError(f"cannot interpret {type(x).__name__} as a map")


def compose(a, b) -> SemiSymbolicMap:
    """``a o b`` for words, generators, translations or maps."""
    return as_map(a).compose(as_map(b))


def invert(w) -> SemiSymbolicMap:
    """Exact inverse of a generator, translation or word."""
    if isinstance(w, OvershearGen):
        return w.inverse_map
    if isinstance(w, DiagonalTranslation):
        return SemiSymbolicMap(w.polymap(-1).components)
    if isinstance(w, AutWord):
        return w.with_letters(tuple((a, -e) for a, e in reversed(w.letters))).to_map()
    raise TypeError(f"cannot invert {type(w).__name__}")


# ---------------------------------------------------------------------------
# Margins


@dataclass(frozen=True)
class MarginReport:
    value: float
    float_estimate: float
    point: tuple
    verified: bool
    precision_bits: int

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "float_estimate": self.float_estimate,
            "point": [[z.real, z.imag] for z in self.point],
            "verified": self.verified,
            "precision_bits": self.precision_bits,
        }


def _mp_deviation(w: AutWord, point, bits: int) -> float:
    with mpmath.workprec(bits):
        img = w.apply_mp(point)
        dev = mpmath.sqrt(sum(abs(a - mpmath.mpc(b)) ** 2 for a, b in zip(img, point)))
        return dev


def _verified_deviation(w: AutWord, point, max_bits: int = 2048):
    bits = 106
    prev = _mp_deviation(w, point, bits)
    while bits < max_bits:
        bits *= 2
        cur = _mp_deviation(w, point, bits)
        if abs(cur - prev) <= 1e-10 * abs(cur) or (cur == 0 and prev == 0):
            return float(cur), bits, True
        prev = cur
    return float(prev), bits, False


def margin_report(w: AutWord, K: Region, grid: GridSpec = GridSpec(), candidates: int = 3) -> MarginReport:
    """Largest displacement ``|w(x) - x|`` over the grid of ``K``.

    Floats rank the grid points; the best few are re-evaluated in mpmath with
    doubling precision until two precisions agree, and the verified value is
    reported.
    """
    if not w.letters:
        raise ValueError("the margin of the empty word (the identity) is undefined")
    pts = K.sample(grid)
    img = w.apply(pts)
    with np.errstate(all="ignore"):
        dev = np.sqrt(np.sum(np.abs(img - pts) ** 2, axis=1))
    finite = np.isfinite(dev)
    order = np.argsort(np.where(finite, -dev, np.inf), kind="stable")
    picks = [int(i) for i in order[:candidates] if finite[i]]
    picks += [int(i) for i in np.nonzero(~finite)[0][:2]]
    float_est = float(np.max(dev[finite])) if np.any(finite) else float("inf")
    best = None
    for i in picks:
        val, bits, ok = _verified_deviation(w, [complex(z) for z in pts[i]])
        if ok and (best is None or val > best[0]):
            best = (val, i, bits)
    if best is None:
        i = picks[0] if picks else 0
        return MarginReport(float_est, float_est, tuple(complex(z) for z in pts[i]), False, 53)
    val, i, bits = best
    return MarginReport(val, float_est, tuple(complex(z) for z in pts[i]), True, bits)


def word_margin(w: AutWord, K: Region, grid: GridSpec = GridSpec()) -> float:
    return margin_report(w, K, grid).value


def degree_growth(w: AutWord, exact_limit: int = 64) -> tuple[int, bool]:
    """Total degree of a polynomial word: exact when the product bound is small."""
    gens = w.generators
    bound = 1
    for name, e in w.letters:
        g = gens[name]
        if isinstance(g, OvershearGen):
            if not g.is_shear:
                raise ValueError("degree growth is defined for shear words")
            deg = max(1, g.g.degree)
            bound *= deg ** abs(e)
    if bound > exact_limit:
        return bound, False
    M = w.to_map().to_polymap()
    return max(c.degree for c in M.components), True


# ---------------------------------------------------------------------------
# Identity certificates


@dataclass(frozen=True)
class IdentityCertificate:
    verdict: bool
    method: str
    max_deviation: float
    grid_spec: dict | None = None
    counterexample: dict | None = None

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "method": self.method, "max_deviation": self.max_deviation,
               "grid_spec": self.grid_spec}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        return out


def _cvec_json(v) -> list:
    return [[complex(x).real, complex(x).imag] for x in v]


def verify_identity(lhs, rhs, K: Region | None = None, tol: float = 1e-12,
                    grid: GridSpec = GridSpec()) -> IdentityCertificate:
    """Compare two maps: symbolically in exact mode, on a grid otherwise.

    Failure is a result: the certificate carries a counterexample point
    (unit vectors are tried first, then the grid) with both images.
    """
    F, G = as_map(lhs), as_map(rhs)
    if F.n != G.n:
        raise DimensionMismatch("maps of different dimension")
    n = F.n
    K = K if K is not None else Polydisc.unit(n)
    pts = K.sample(grid)
    with np.errstate(all="ignore"):
        dev = np.sqrt(np.sum(np.abs(F.evaluate(pts) - G.evaluate(pts)) ** 2, axis=1))
    max_dev = float(np.max(dev)) if dev.size else 0.0
    if F.mode == EXACT and G.mode == EXACT:
        if F == G:
            return IdentityCertificate(True, "symbolic", 0.0, grid.to_json())
        exact = F.is_polynomial() and G.is_polynomial()
        basis = [tuple(QQi(1) if i == j else QQi(0) for j in range(n)) for i in range(n)]
        for e in basis:
            if exact:
                a, b = F.evaluate_exact(e), G.evaluate_exact(e)
                d = math.sqrt(sum(float((x - y).abs2()) for x, y in zip(a, b)))
            else:
                pt = np.array([[complex(x) for x in e]])
                a, b = F.evaluate(pt)[0], G.evaluate(pt)[0]
                d = float(np.linalg.norm(a - b))
            if d > 0:
                ce = {"point": _cvec_json(e), "lhs": _cvec_json(a), "rhs": _cvec_json(b), "deviation": d}
                return IdentityCertificate(False, "symbolic", max(max_dev, d), grid.to_json(), ce)
        i = int(np.argmax(dev))
        ce = {"point": _cvec_json(pts[i]), "lhs": _cvec_json(F.evaluate(pts[i:i + 1])[0]),
              "rhs": _cvec_json(G.evaluate(pts[i:i + 1])[0]), "deviation": float(dev[i])}
        return IdentityCertificate(False, "symbolic", max_dev, grid.to_json(), ce)
    if max_dev <= tol:
        return IdentityCertificate(True, "sampled", max_dev, grid.to_json())
    i = int(np.nanargmax(np.where(np.isfinite(dev), dev, np.inf)))
    ce = {"point": _cvec_json(pts[i]), "lhs": _cvec_json(F.evaluate(pts[i:i + 1])[0]),
          "rhs": _cvec_json(G.evaluate(pts[i:i + 1])[0]), "deviation": float(dev[i])}
    return IdentityCertificate(False, "sampled", max_dev, grid.to_json(), ce)


def transposition_audit() -> dict:
    """The maps ``A(z) = (z1, z2 + z1)``, ``B(z) = (z1 - z2, z2)``, ``t(z) = (z2, -z1)``.

    Compares ``A^-1 o B o A`` and ``A^-1 o B^-1 o A^-1`` with ``t``; ``A`` and
    ``B`` are shears, ``B`` after the coordinate swap ``P(z) = (z2, -z1)``.
    """
    z1, z2 = SparsePoly.variables(2)
    one = SparsePoly.var(0, 1)
    A = make_shear(2, one, name="A")
    P = ((0, 1), (-1, 0))
    B = make_shear(2, one, A=P, name="B")
    t = SemiSymbolicMap([z2, -z1])
    expected_B = SemiSymbolicMap([z1 - z2, z2])
    if B.map != expected_B:
        raise AssertionError("conjugated shear does not match (z1 - z2, z2)")
    printed = compose(invert(A), compose(B, A))
    alternative = compose(invert(A), compose(invert(B), invert(A)))
    return {
        "A": A,
        "B": B,
        "t": t,
        "printed": printed,
        "alternative": alternative,
        "printed_certificate": verify_identity(printed, t),
        "alternative_certificate": verify_identity(alternative, t),
    }


# ---------------------------------------------------------------------------
# Identity suite


def random_poly(rng: np.random.Generator, nvars: int, degree: int, terms: int = 4,
                max_height: int = 9) -> SparsePoly:
    """Sparse polynomial with small random rational coefficients (exact)."""
    out = {}
    for _ in range(terms):
        d = int(rng.integers(0, degree + 1))
        cuts = np.sort(rng.integers(0, d + 1, size=nvars - 1)) if nvars > 1 else np.array([], int)
        e = tuple(int(x) for x in np.diff(np.concatenate([[0], cuts, [d]])))
        num = int(rng.integers(-max_height, max_height + 1)) or 1
        den = int(rng.integers(1, max_height + 1))
        out[e] = QQi(Fraction(num, den))
    return SparsePoly(nvars, out)


def _random_sl(rng: np.random.Generator, n: int):
    """Product of integer elementary matrices (determinant exactly 1)."""
    A = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    for _ in range(n):
        i, j = rng.choice(n, size=2, replace=False)
        k = int(rng.integers(-2, 3))
        A = [[A[r][c] + (k * A[j][c] if r == i else 0) for c in range(n)] for r in range(n)]
    return A


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    holds: bool
    detail: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "holds": self.holds, "detail": self.detail}


def identity_suite(n: int, seed: int = 0, degree: int = 3, words: int = 6) -> list[IdentityCheck]:
    """Exact checks of the cyclic-map relations, shear Jacobians, inverses and the overshear split.

    ``degree`` bounds the random ``f`` and ``g`` of the split; the random
    conjugated shears in the words have degree 2 so that products stay small.
    """
    rng = np.random.default_rng(seed)
    Id = SemiSymbolicMap.identity(n)
    I = make_cyclic_I(n)
    powers = [Id]
    for _ in range(2 * n):
        powers.append(I.map.compose(powers[-1]))
    sign = -((-1) ** n)
    checks = [
        IdentityCheck(f"I^{2 * n} = id", powers[2 * n] == Id),
        IdentityCheck(f"I^{n} = {sign:+d} id",
                      powers[n] == SemiSymbolicMap([z * sign for z in SparsePoly.variables(n)])),
        IdentityCheck(f"I^-1 = I^{2 * n - 1}", I.inverse_map == powers[2 * n - 1]),
    ]
    gens = [make_shear(n, random_poly(rng, n - 1, 2), _random_sl(rng, n), f"S{k}") for k in range(3)]
    alphabet = tuple((g.name, g) for g in gens) + (("I", I),)
    names = [a for a, _ in alphabet]
    one = ExpPoly.constant(1, n)
    jac_ok = True
    for _ in range(words):
        length = int(rng.integers(1, 4))
        letters = [(names[int(rng.integers(0, len(names)))], int(rng.choice([-1, 1]))) for _ in range(length)]
        jac_ok &= jacobian_det(AutWord(alphabet, tuple(letters))) == one
    inv_ok = all(g.map.compose(g.inverse_map) == Id and g.inverse_map.compose(g.map) == Id for g in gens)
    checks.append(IdentityCheck("shear words have Jacobian 1", jac_ok, f"{words} random words of length <= 3"))
    checks.append(IdentityCheck("S o S^-1 = S^-1 o S = id", inv_ok, "3 random conjugated shears"))
    if n % 2 == 0:
        fh = random_poly(rng, n - 1, degree)
        gh = random_poly(rng, n - 1, degree)
        zero = SparsePoly.zero(n - 1)
        lhs = compose(make_F(n, zero, gh), compose(I.inverse_map, make_F(n, fh, zero)))
        ok = lhs == make_F(n, fh, gh).map
        checks.append(IdentityCheck("F(0,g) o I^-1 o F(f,0) = F(f,g)", ok, f"f = {fh}; g = {gh}"))
    return checks
