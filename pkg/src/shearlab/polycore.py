"""Sparse multivariate polynomials over the complex numbers.

Two coefficient modes are supported.  ``exact`` stores Gaussian rationals
(:class:`QQi`) and never falls back to floating point; ``float`` stores
Python ``complex`` values.  Terms are kept in a dict keyed by exponent tuples
and are listed in graded lexicographic order whenever an ordering is visible
(serialization, evaluation, iteration), which makes floating results
reproducible bit for bit.
"""

from __future__ import annotations

import ast
import contextlib
import contextvars
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

EXACT = "exact"
FLOAT = "float"
MODES = (EXACT, FLOAT)
DEFAULT_DEGREE_CAP = 512

_degree_cap: contextvars.ContextVar[int] = contextvars.ContextVar(
    "degree_cap", default=DEFAULT_DEGREE_CAP
)


class PolyError(ValueError):
    """Base class for polynomial input errors."""


class DimensionMismatch(PolyError):
    pass


class ModeMismatch(PolyError):
    pass


class DegreeOverflowError(PolyError):
    def __init__(self, degree: int, cap: int):
        super().__init__(f"total degree {degree} exceeds the cap {cap}")
        self.degree = degree
        self.cap = cap


class NotDivisibleError(PolyError):
    """Raised by :func:`poly_divide_exact`; carries the nonzero remainder."""

    def __init__(self, remainder: "SparsePoly", quotient: "SparsePoly"):
        super().__init__(f"division leaves a nonzero remainder: {remainder}")
        self.remainder = remainder
        self.quotient = quotient


def degree_cap() -> int:
    return _degree_cap.get()


@contextlib.contextmanager
def degree_limit(cap: int):
    """Temporarily change the total-degree cap for products and compositions."""
    token = _degree_cap.set(int(cap))
    try:
        yield
    finally:
        _degree_cap.reset(token)


def _check_degree(deg: int) -> None:
    cap = _degree_cap.get()
    if deg > cap:
        raise DegreeOverflowError(deg, cap)


# ---------------------------------------------------------------------------
# Gaussian rationals


def _as_fraction(x) -> Fraction:
    if type(x) is Fraction:
        return x
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (float, complex, np.floating)):
        raise TypeError("floating values need an explicit exact conversion (QQi.from_complex)")
    if isinstance(x, np.integer):
        return Fraction(int(x))
    raise TypeError(f"cannot interpret {x!r} as a rational number")


class QQi:
    """Exact Gaussian rational ``re + i*im``."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = _as_fraction(re)
        self.im = _as_fraction(im)

    @classmethod
    def _make(cls, re: Fraction, im: Fraction) -> "QQi":
        obj = object.__new__(cls)
        obj.re = re
        obj.im = im
        return obj

    @classmethod
    def coerce(cls, x) -> "QQi":
        if isinstance(x, QQi):
            return x
        return cls(x)

    @classmethod
    def from_complex(cls, z) -> "QQi":
        """Exact value of a double (binary floats are dyadic rationals)."""
        z = complex(z)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise ValueError(f"non-finite value {z!r}")
        return cls._make(Fraction(z.real), Fraction(z.imag))

    def __add__(self, other):
        if not isinstance(other, QQi):
            try:
                other = QQi.coerce(other)
            except TypeError:
                return NotImplemented
        return QQi._make(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, QQi):
            try:
                other = QQi.coerce(other)
            except TypeError:
                return NotImplemented
        return QQi._make(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        try:
            other = QQi.coerce(other)
        except TypeError:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        if not isinstance(other, QQi):
            try:
                other = QQi.coerce(other)
            except TypeError:
                return NotImplemented
        a, b, c, d = self.re, self.im, other.re, other.im
        if not b and not d:
            return QQi._make(a * c, b)
        if not b:
            return QQi._make(a * c, a * d)
        if not d:
            return QQi._make(a * c, b * c)
        return QQi._make(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, QQi):
            try:
                other = QQi.coerce(other)
            except TypeError:
                return NotImplemented
        if not other:
            raise ZeroDivisionError("division by zero Gaussian rational")
        if not other.im:
            return QQi._make(self.re / other.re, self.im / other.re)
        n = other.re * other.re + other.im * other.im
        return self * QQi._make(other.re / n, -other.im / n)

    def __rtruediv__(self, other):
        return QQi.coerce(other) / self

    def __neg__(self):
        return QQi._make(-self.re, -self.im)

    def __pos__(self):
        return self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return QQi(1) / self ** (-k)
        result = QQi(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        if isinstance(other, QQi):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return not self.im and self.re == other
        return NotImplemented

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def conjugate(self) -> "QQi":
        return QQi._make(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if not self.im:
            return f"QQi({self.re})"
        return f"QQi({self.re}, {self.im})"

    def __str__(self):
        if not self.im:
            return str(self.re)
        if not self.re:
            return f"{self.im}*i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}*i)"


def _ratio_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# Sparse polynomials

Exps = tuple


def _order_key(e: Exps):
    return (sum(e), e)


def _coerce_coeff(c, mode: str):
    if mode == EXACT:
        return QQi.coerce(c)
    if isinstance(c, QQi):
        raise ModeMismatch("exact coefficient given to a float-mode polynomial")
    return complex(c)


class SparsePoly:
    """Immutable sparse polynomial in ``nvars`` variables.

    >>> z1, z2 = SparsePoly.variables(2)
    >>> (z1 + z2) * (z1 - z2) == z1**2 - z2**2
    True
    """

    __slots__ = ("nvars", "mode", "_terms", "_sorted", "_hash", "_plan")

    def __init__(self, nvars: int, terms: Mapping | Iterable = (), mode: str = EXACT):
        if mode not in MODES:
            raise ValueError(f"unknown coefficient mode {mode!r}")
        if nvars < 0:
            raise ValueError("nvars must be non-negative")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        for exps, c in items:
            e = tuple(int(x) for x in exps)
            if len(e) != nvars:
                raise DimensionMismatch(f"exponent {e} does not have length {nvars}")
            if any(x < 0 for x in e):
                raise PolyError(f"negative exponent in {e}")
            c = _coerce_coeff(c, mode)
            if e in acc:
                acc[e] = acc[e] + c
            else:
                acc[e] = c
        self._init(nvars, {e: c for e, c in acc.items() if c}, mode)

    def _init(self, nvars, terms, mode):
        self.nvars = nvars
        self.mode = mode
        self._terms = terms
        self._sorted = None
        self._hash = None
        self._plan = None

    @classmethod
    def _raw(cls, nvars: int, terms: dict, mode: str) -> "SparsePoly":
        """Trusted constructor: ``terms`` already pruned and typed."""
        obj = object.__new__(cls)
        obj._init(nvars, terms, mode)
        return obj

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, nvars: int, mode: str = EXACT) -> "SparsePoly":
        return cls._raw(nvars, {}, mode)

    @classmethod
    def constant(cls, c, nvars: int, mode: str = EXACT) -> "SparsePoly":
        c = _coerce_coeff(c, mode)
        return cls._raw(nvars, {(0,) * nvars: c} if c else {}, mode)

    @classmethod
    def var(cls, i: int, nvars: int, mode: str = EXACT) -> "SparsePoly":
        if not 0 <= i < nvars:
            raise DimensionMismatch(f"variable index {i} out of range for {nvars} variables")
        e = [0] * nvars
        e[i] = 1
        one = QQi(1) if mode == EXACT else 1.0 + 0j
        return cls._raw(nvars, {tuple(e): one}, mode)

    @classmethod
    def variables(cls, nvars: int, mode: str = EXACT) -> list["SparsePoly"]:
        return [cls.var(i, nvars, mode) for i in range(nvars)]

    @classmethod
    def univariate(cls, coeffs: Sequence, mode: str = EXACT, nvars: int = 1, var: int = 0):
        """Polynomial ``sum coeffs[k] * z_var**k``."""
        terms = {}
        for k, c in enumerate(coeffs):
            c = _coerce_coeff(c, mode)
            if c:
                e = [0] * nvars
                e[var] = k
                terms[tuple(e)] = c
        return cls._raw(nvars, terms, mode)

    # inspection ---------------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self) -> list:
        """Terms in canonical (graded lexicographic) order."""
        if self._sorted is None:
            self._sorted = sorted(self._terms.items(), key=lambda t: _order_key(t[0]))
        return self._sorted

    def __iter__(self) -> Iterator:
        return iter(self.items())

    def __len__(self):
        return len(self._terms)

    def coeff(self, exps) -> object:
        zero = QQi(0) if self.mode == EXACT else 0j
        return self._terms.get(tuple(exps), zero)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self._terms)

    def constant_term(self):
        return self.coeff((0,) * self.nvars)

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self._terms), default=-1)

    def degree_in(self, var: int) -> int:
        return max((e[var] for e in self._terms), default=-1)

    def depends_on(self, var: int) -> bool:
        return any(e[var] for e in self._terms)

    def __eq__(self, other):
        if isinstance(other, SparsePoly):
            return (self.nvars == other.nvars and self.mode == other.mode
                    and self._terms == other._terms)
        if isinstance(other, (int, Fraction, QQi)) and self.mode == EXACT:
            return self == SparsePoly.constant(other, self.nvars)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, self.mode, tuple(self.items())))
        return self._hash

    def __repr__(self):
        return f"SparsePoly({self.nvars}, {self}, mode={self.mode!r})"

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for e, c in reversed(self.items()):
            mono = "*".join(
                f"z{i + 1}" if k == 1 else f"z{i + 1}^{k}" for i, k in enumerate(e) if k
            )
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts)

    # conversions --------------------------------------------------------
    def to_float(self) -> "SparsePoly":
        if self.mode == FLOAT:
            return self
        return SparsePoly._raw(self.nvars, {e: complex(c) for e, c in self._terms.items()}, FLOAT)

    def to_exact(self) -> "SparsePoly":
        """Exact polynomial with the (dyadic) values of the float coefficients."""
        if self.mode == EXACT:
            return self
        return SparsePoly._raw(
            self.nvars, {e: QQi.from_complex(c) for e, c in self._terms.items()}, EXACT)

    def embed(self, nvars: int, positions: Sequence[int]) -> "SparsePoly":
        """Re-index variables: variable i becomes variable ``positions[i]`` of ``nvars``."""
        if len(positions) != self.nvars:
            raise DimensionMismatch("positions must list one slot per variable")
        terms = {}
        for e, c in self._terms.items():
            new = [0] * nvars
            for i, k in enumerate(e):
                new[positions[i]] += k
            terms[tuple(new)] = c
        return SparsePoly._raw(nvars, terms, self.mode)

    # operators ------------------------------------------------------------
    def _lift(self, other) -> "SparsePoly":
        if isinstance(other, SparsePoly):
            return other
        if self.mode == EXACT and isinstance(other, (float, complex)):
            raise ModeMismatch("floating scalar combined with an exact polynomial")
        return SparsePoly.constant(other, self.nvars, self.mode)

    def __add__(self, other):
        return poly_add(self, self._lift(other))

    def __radd__(self, other):
        return poly_add(self._lift(other), self)

    def __sub__(self, other):
        return poly_add(self, poly_neg(self._lift(other)))

    def __rsub__(self, other):
        return poly_add(self._lift(other), poly_neg(self))

    def __neg__(self):
        return poly_neg(self)

    def __mul__(self, other):
        if isinstance(other, SparsePoly):
            return poly_mul(self, other)
        return poly_scale(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __pow__(self, k: int):
        return poly_pow(self, k)

    def __call__(self, *x):
        return poly_eval(self, x)


def _require_same(a: SparsePoly, b: SparsePoly) -> None:
    if a.nvars != b.nvars:
        raise DimensionMismatch(f"{a.nvars} vs {b.nvars} variables")
    if a.mode != b.mode:
        raise ModeMismatch(f"{a.mode} vs {b.mode} coefficients")


def poly_add(a: SparsePoly, b: SparsePoly) -> SparsePoly:
    _require_same(a, b)
    if len(a._terms) < len(b._terms):
        a, b = b, a
    terms = dict(a._terms)
    for e, c in b._terms.items():
        if e in terms:
            s = terms[e] + c
            if s:
                terms[e] = s
            else:
                del terms[e]
        else:
            terms[e] = c
    return SparsePoly._raw(a.nvars, terms, a.mode)


def poly_neg(a: SparsePoly) -> SparsePoly:
    return SparsePoly._raw(a.nvars, {e: -c for e, c in a._terms.items()}, a.mode)


def poly_scale(a: SparsePoly, s) -> SparsePoly:
    if a.mode == EXACT and isinstance(s, (float, complex)):
        raise ModeMismatch("floating scalar combined with an exact polynomial")
    s = _coerce_coeff(s, a.mode)
    if not s:
        return SparsePoly.zero(a.nvars, a.mode)
    return SparsePoly._raw(a.nvars, {e: c * s for e, c in a._terms.items()}, a.mode)


def poly_mul(a: SparsePoly, b: SparsePoly) -> SparsePoly:
    _require_same(a, b)
    if a.is_zero() or b.is_zero():
        return SparsePoly.zero(a.nvars, a.mode)
    _check_degree(a.degree + b.degree)
    terms: dict = {}
    get = terms.get
    for ea, ca in a._terms.items():
        for eb, cb in b._terms.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            prev = get(e)
            terms[e] = ca * cb if prev is None else prev + ca * cb
    return SparsePoly._raw(a.nvars, {e: c for e, c in terms.items() if c}, a.mode)


def poly_pow(a: SparsePoly, k: int) -> SparsePoly:
    if k < 0:
        raise PolyError("negative powers are not polynomials")
    if k and a.degree > 0:
        _check_degree(a.degree * k)
    result = SparsePoly.constant(1, a.nvars, a.mode)
    base = a
    while k:
        if k & 1:
            result = poly_mul(result, base)
        k >>= 1
        if k:
            base = poly_mul(base, base)
    return result


def poly_derivative(p: SparsePoly, var: int) -> SparsePoly:
    if not 0 <= var < p.nvars:
        raise DimensionMismatch(f"variable index {var} out of range")
    terms = {}
    for e, c in p._terms.items():
        k = e[var]
        if k:
            new = list(e)
            new[var] = k - 1
            terms[tuple(new)] = c * k
    return SparsePoly._raw(p.nvars, terms, p.mode)


def poly_compose(p: SparsePoly, args: Sequence[SparsePoly]) -> SparsePoly:
    """Substitute ``args[i]`` for variable ``i`` of ``p``."""
    if len(args) != p.nvars:
        raise DimensionMismatch(f"{p.nvars} arguments expected, got {len(args)}")
    if not args:
        return p
    m = args[0].nvars
    for a in args:
        if a.nvars != m:
            raise DimensionMismatch("composition arguments must share a variable count")
        if a.mode != p.mode:
            raise ModeMismatch("composition arguments must share the coefficient mode")
    if p.is_zero():
        return SparsePoly.zero(m, p.mode)
    _check_degree(max(sum(k * max(a.degree, 0) for k, a in zip(e, args)) for e in p._terms))
    powers: list[dict[int, SparsePoly]] = [{0: SparsePoly.constant(1, m, p.mode)} for _ in args]

    def power(i: int, k: int) -> SparsePoly:
        table = powers[i]
        if k not in table:
            top = max(j for j in table if j < k)
            acc = table[top]
            for j in range(top + 1, k + 1):
                acc = poly_mul(acc, args[i])
                table[j] = acc
        return table[k]

    # Accumulate into a plain dict: sum of c * prod(args_i ** e_i).
    acc: dict = {}
    for e, c in p.items():
        term = None
        for i, k in enumerate(e):
            if k:
                f = power(i, k)
                term = f if term is None else poly_mul(term, f)
        if term is None:
            pieces = {(0,) * m: c}.items()
        else:
            pieces = ((te, tc * c) for te, tc in term._terms.items())
        for te, tc in pieces:
            prev = acc.get(te)
            acc[te] = tc if prev is None else prev + tc
    return SparsePoly._raw(m, {e: c for e, c in acc.items() if c}, p.mode)


# evaluation ---------------------------------------------------------------


def _horner_plan(p: SparsePoly):
    """Nested grouping used for multivariate Horner evaluation."""
    if p._plan is None:

        def build(items, var):
            if var == p.nvars:
                return items[0][1] if items else None
            groups: dict[int, list] = {}
            for e, c in items:
                groups.setdefault(e[var], []).append((e, c))
            return (var, sorted((k, build(v, var + 1)) for k, v in groups.items()))

        p._plan = build(p.items(), 0) if p._terms else None
    return p._plan


def _run_plan(plan, x, zero, one, leaf=None):
    if not isinstance(plan, tuple):
        return plan if leaf is None else leaf(plan)
    var, groups = plan
    xv = x[var]
    acc = zero
    prev = None
    for k, sub in reversed(groups):
        val = _run_plan(sub, x, zero, one, leaf)
        if prev is None:
            acc = val
        else:
            gap = prev - k
            acc = acc * (xv if gap == 1 else xv ** gap) + val
        prev = k
    if prev:
        acc = acc * (xv if prev == 1 else xv ** prev)
    return acc


def poly_eval(p: SparsePoly, x: Sequence):
    """Evaluate by nested Horner.

    In exact mode the point must be exact (ints, Fractions, QQi) and the
    result is a :class:`QQi`.  In float mode ``x`` may hold complex scalars or
    numpy arrays of a common shape (vectorized evaluation).
    """
    if len(x) != p.nvars:
        raise DimensionMismatch(f"point of length {len(x)} for {p.nvars} variables")
    if p.mode == EXACT:
        xs = [QQi.coerce(v) for v in x]
        if not p._terms:
            return QQi(0)
        return _run_plan(_horner_plan(p), xs, QQi(0), QQi(1))
    xs = [np.asarray(v, dtype=complex) if isinstance(v, np.ndarray) else complex(v) for v in x]
    if not p._terms:
        shape = np.broadcast_shapes(*(np.shape(v) for v in xs)) if xs else ()
        return np.zeros(shape, complex) if shape else 0j
    out = _run_plan(_horner_plan(p), xs, 0j, 1 + 0j)
    if isinstance(out, np.ndarray) or not any(isinstance(v, np.ndarray) for v in xs):
        return out
    shape = np.broadcast_shapes(*(np.shape(v) for v in xs))
    return np.full(shape, out, complex)


def poly_eval_points(p: SparsePoly, points: np.ndarray) -> np.ndarray:
    """Float evaluation at the rows of an ``(N, nvars)`` complex array."""
    points = np.asarray(points, dtype=complex)
    q = p.to_float() if p.mode == EXACT else p
    if points.ndim != 2 or points.shape[1] != p.nvars:
        raise DimensionMismatch(f"expected points of shape (N, {p.nvars})")
    if p.nvars == 0:
        return np.full(points.shape[0], complex(q.constant_term()), complex)
    return np.asarray(poly_eval(q, [points[:, i] for i in range(p.nvars)]), complex)


def poly_eval_with(p: SparsePoly, x: Sequence, convert, zero):
    """Horner evaluation in a foreign number type (e.g. mpmath) via ``convert``."""
    if len(x) != p.nvars:
        raise DimensionMismatch(f"point of length {len(x)} for {p.nvars} variables")
    if not p._terms:
        return zero
    return _run_plan(_horner_plan(p), list(x), zero, None, convert)


def naive_eval(p: SparsePoly, x: Sequence):
    """Plain monomial sum; a reference for :func:`poly_eval`."""
    if p.mode == EXACT:
        xs = [QQi.coerce(v) for v in x]
        total = QQi(0)
    else:
        xs = [complex(v) for v in x]
        total = 0j
    for e, c in p.items():
        term = c
        for v, k in zip(xs, e):
            term = term * v ** k
        total = total + term
    return total


# division -----------------------------------------------------------------


def _lex_leading(p: SparsePoly):
    e = max(p._terms)
    return e, p._terms[e]


def poly_divide_exact(num: SparsePoly, den: SparsePoly) -> SparsePoly:
    """Quotient of an exact division, by multivariate division in lex order.

    For a single divisor the remainder is zero exactly when ``den`` divides
    ``num``; otherwise :class:`NotDivisibleError` is raised with the remainder.
    Float-mode inputs accept a remainder below ``1e-12`` relative size.
    """
    _require_same(num, den)
    if den.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    n = num.nvars
    d_lead_e, d_lead_c = _lex_leading(den)
    rem = dict(num._terms)
    quot: dict = {}
    leftover: dict = {}
    den_items = list(den._terms.items())
    while rem:
        e = max(rem)
        c = rem[e]
        if all(x >= y for x, y in zip(e, d_lead_e)):
            qe = tuple(x - y for x, y in zip(e, d_lead_e))
            qc = c / d_lead_c
            quot[qe] = quot.get(qe, 0) + qc
            for de, dc in den_items:
                te = tuple(x + y for x, y in zip(qe, de))
                v = rem.get(te, 0) - qc * dc
                if te == e or not v:
                    rem.pop(te, None)
                else:
                    rem[te] = v
        else:
            leftover[e] = c
            del rem[e]
    quotient = SparsePoly._raw(n, {e: c for e, c in quot.items() if c}, num.mode)
    if leftover:
        remainder = SparsePoly._raw(n, leftover, num.mode)
        if num.mode == FLOAT:
            scale = max((abs(c) for c in num._terms.values()), default=1.0)
            if max(abs(c) for c in leftover.values()) <= 1e-12 * max(scale, 1.0):
                return quotient
        raise NotDivisibleError(remainder, quotient)
    return quotient


# univariate helpers ---------------------------------------------------------


def univariate_coeffs(p: SparsePoly, var: int = 0) -> list:
    """Dense coefficient list of a polynomial depending only on ``var``."""
    zero = QQi(0) if p.mode == EXACT else 0j
    if p.is_zero():
        return []
    out = [zero] * (p.degree_in(var) + 1)
    for e, c in p._terms.items():
        if any(k for i, k in enumerate(e) if i != var):
            raise PolyError("polynomial depends on more than one variable")
        out[e[var]] = c
    return out


def poly_gcd_univariate(a: SparsePoly, b: SparsePoly) -> SparsePoly:
    """Monic gcd of two exact univariate polynomials (Euclid)."""
    _require_same(a, b)
    if a.nvars != 1 or a.mode != EXACT:
        raise PolyError("gcd is implemented for exact univariate polynomials")

    def trim(c):
        while c and not c[-1]:
            c.pop()
        return c

    x, y = trim(univariate_coeffs(a)), trim(univariate_coeffs(b))
    while y:
        r = list(x)
        while len(r) >= len(y):
            f = r[-1] / y[-1]
            shift = len(r) - len(y)
            for i, c in enumerate(y):
                r[shift + i] = r[shift + i] - f * c
            r.pop()
            trim(r)
        x, y = y, r
    if not x:
        return SparsePoly.zero(1)
    lead = x[-1]
    return SparsePoly.univariate([c / lead for c in x])


# integer Taylor shifts --------------------------------------------------------


def _gaussian_integer_form(coeffs: Sequence[QQi]) -> tuple[list[tuple[int, int]], int]:
    """Write ``coeffs`` as Gaussian integers over one common denominator."""
    den = 1
    for c in coeffs:
        den = math.lcm(den, c.re.denominator, c.im.denominator)
    ints = [
        (c.re.numerator * (den // c.re.denominator), c.im.numerator * (den // c.im.denominator))
        for c in coeffs
    ]
    return ints, den


def affine_substitute_ints(re, im, alpha: QQi, beta: QQi):
    """Gaussian-integer coefficients of ``p(alpha + beta*u)``.

    ``p`` has coefficients ``re[k] + i*im[k]`` (Python ints) over an implicit
    common denominator ``D``; the result is ``(re', im', E)`` with the new
    coefficients over ``D * E``.  Horner steps run on numpy object arrays,
    with a cheaper path when everything is real.
    """
    n = len(re) - 1
    e = math.lcm(alpha.re.denominator, alpha.im.denominator,
                 beta.re.denominator, beta.im.denominator)
    ar, ai = int(alpha.re * e), int(alpha.im * e)
    br, bi = int(beta.re * e), int(beta.im * e)
    real = not (ai or bi or any(im))
    acc_r = np.array([re[n]], dtype=object)
    acc_i = None if real else np.array([im[n]], dtype=object)
    epow = 1
    for k in range(n - 1, -1, -1):
        epow *= e
        size = len(acc_r) + 1
        new_r = np.zeros(size, dtype=object)
        if real:
            new_r[:-1] += acc_r * ar
            new_r[1:] += acc_r * br
            new_r[0] += re[k] * epow
        else:
            new_i = np.zeros(size, dtype=object)
            new_r[:-1] += acc_r * ar - acc_i * ai
            new_i[:-1] += acc_r * ai + acc_i * ar
            new_r[1:] += acc_r * br - acc_i * bi
            new_i[1:] += acc_r * bi + acc_i * br
            new_r[0] += re[k] * epow
            new_i[0] += im[k] * epow
            acc_i = new_i
        acc_r = new_r
    out_r = [int(x) for x in acc_r]
    out_i = [0] * len(out_r) if real else [int(x) for x in acc_i]
    return out_r, out_i, epow


def _affine_substitute(coeffs: Sequence[QQi], alpha: QQi, beta: QQi):
    """Coefficients of ``p(alpha + beta*u)`` as ``(pairs, denominator)``."""
    ints, d = _gaussian_integer_form(coeffs)
    r, i, e = affine_substitute_ints([x for x, _ in ints], [y for _, y in ints], alpha, beta)
    return list(zip(r, i)), d * e


def ints_to_complex(re, im, den: int) -> np.ndarray:
    """Correctly rounded doubles of ``(re + i*im) / den``."""
    return np.array([complex(r / den, i / den) for r, i in zip(re, im)], dtype=complex)


def affine_substitute_univariate(coeffs: Sequence[QQi], alpha, beta) -> list[QQi]:
    """Exact coefficients of ``p(alpha + beta*u)`` for a dense coefficient list."""
    if not coeffs:
        return []
    ints, den = _affine_substitute(coeffs, QQi.coerce(alpha), QQi.coerce(beta))
    return [QQi._make(Fraction(r, den), Fraction(i, den)) for r, i in ints]


def local_expansion(p: SparsePoly, center: complex, radius: float, var: int = 0) -> np.ndarray:
    """Taylor coefficients of ``u -> p(center + radius*u)`` rounded to doubles.

    The expansion is computed exactly and each coefficient is then correctly
    rounded, so the only floating error is one rounding per coefficient.
    """
    coeffs = univariate_coeffs(p.to_exact(), var)
    if not coeffs:
        return np.zeros(1, complex)
    ints, den = _affine_substitute(coeffs, QQi.from_complex(center), QQi.from_complex(radius))
    return np.array([complex(r / den, i / den) for r, i in ints], dtype=complex)


def poly_translate(p: SparsePoly, shift: Sequence) -> SparsePoly:
    """``p(z + shift)``, computed one variable at a time by Taylor shifts."""
    if len(shift) != p.nvars:
        raise DimensionMismatch("shift vector length must equal nvars")
    if p.mode == FLOAT:
        args = [SparsePoly.var(i, p.nvars, FLOAT) + complex(s) for i, s in enumerate(shift)]
        return poly_compose(p, args)
    current = p
    one = QQi(1)
    for var, s in enumerate(shift):
        s = QQi.coerce(s) if not isinstance(s, (float, complex)) else QQi.from_complex(s)
        if not s or not current.depends_on(var):
            continue
        groups: dict[tuple, dict[int, QQi]] = {}
        for e, c in current._terms.items():
            rest = e[:var] + (0,) + e[var + 1:]
            groups.setdefault(rest, {})[e[var]] = c
        terms: dict = {}
        for rest, col in groups.items():
            dense = [col.get(k, QQi(0)) for k in range(max(col) + 1)]
            for k, c in enumerate(affine_substitute_univariate(dense, s, one)):
                if c:
                    e = rest[:var] + (k,) + rest[var + 1:]
                    terms[e] = terms[e] + c if e in terms else c
        current = SparsePoly._raw(p.nvars, {e: c for e, c in terms.items() if c}, EXACT)
    return current


def sup_bound_polydisc(p: SparsePoly, center: Sequence[complex], radii: Sequence[float]) -> float:
    """Upper bound for ``sup |p|`` on a polydisc: the coefficient l1-norm after recentring."""
    q = p.to_exact()
    if q.is_zero():
        return 0.0
    if q.nvars == 1:
        coeffs = univariate_coeffs(q)
        ints, den = _affine_substitute(coeffs, QQi.from_complex(center[0]),
                                       QQi.from_complex(radii[0]))
        total = sum(math.hypot(r, i) for r, i in
                    ((r / den, i / den) for r, i in ints))
        return total * (1 + 1e-12)
    args = [
        SparsePoly.var(i, q.nvars) * QQi.from_complex(r) + QQi.from_complex(c)
        for i, (c, r) in enumerate(zip(center, radii))
    ]
    local = poly_compose(q, args)
    return sum(abs(complex(c)) for c in local._terms.values()) * (1 + 1e-12)


# ---------------------------------------------------------------------------
# Serialization


def poly_to_json(p: SparsePoly) -> dict:
    terms = []
    for e, c in p.items():
        if p.mode == EXACT:
            terms.append([list(e), _ratio_str(c.re), _ratio_str(c.im)])
        else:
            terms.append([list(e), c.real, c.imag])
    return {"nvars": p.nvars, "mode": p.mode, "terms": terms}


def poly_from_json(data: Mapping) -> SparsePoly:
    try:
        nvars = int(data["nvars"])
        mode = data.get("mode", EXACT)
        raw = data["terms"]
    except (KeyError, TypeError) as exc:
        raise PolyError(f"malformed polynomial record: {exc}") from None
    terms = []
    for entry in raw:
        if len(entry) != 3:
            raise PolyError(f"malformed term {entry!r}")
        e, re, im = entry
        if mode == EXACT:
            if isinstance(re, float) or isinstance(im, float):
                raise PolyError("exact-mode coefficients must be integers or ratio strings")
            terms.append((e, QQi(Fraction(re), Fraction(im))))
        else:
            terms.append((e, complex(float(re), float(im))))
    return SparsePoly(nvars, terms, mode)


def parse_poly(text: str, nvars: int, names: Sequence[str] | None = None) -> SparsePoly:
    """Exact polynomial from an expression such as ``"z2^2 - 3/2*z1 + 2*i"``.

    Allowed: integer literals, ``i``, the variable names (``z1..zn`` unless
    given), ``+ - * /`` and non-negative integer powers (``^`` or ``**``).
    Division is only by constants.
    """
    names = list(names) if names is not None else [f"z{k + 1}" for k in range(nvars)]
    if len(names) != nvars:
        raise PolyError("one name per variable expected")
    lookup = {nm: SparsePoly.var(k, nvars) for k, nm in enumerate(names)}
    try:
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise PolyError(f"cannot parse polynomial {text!r}: {exc.msg}") from None

    def walk(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
            return SparsePoly.constant(node.value, nvars)
        if isinstance(node, ast.Name):
            if node.id in lookup:
                return lookup[node.id]
            if node.id == "i":
                return SparsePoly.constant(QQi(0, 1), nvars)
            raise PolyError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = walk(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a, b = walk(node.left), node.right
            if isinstance(node.op, ast.Pow):
                if not (isinstance(b, ast.Constant) and isinstance(b.value, int) and b.value >= 0):
                    raise PolyError("exponents must be non-negative integer literals")
                return a ** b.value
            b = walk(b)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div):
                if not b.is_constant() or b.is_zero():
                    raise PolyError("division only by nonzero constants")
                return a * (QQi(1) / b.constant_term())
        raise PolyError(f"unsupported syntax in {text!r}")

    return walk(tree.body)


# ---------------------------------------------------------------------------
# Polynomial maps


@dataclass(frozen=True)
class PolyMap:
    """A polynomial self-map of affine n-space."""

    n: int
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) != self.n:
            raise DimensionMismatch(f"{len(comps)} components for dimension {self.n}")
        for c in comps:
            if c.nvars != self.n:
                raise DimensionMismatch("every component must use n variables")

    @classmethod
    def identity(cls, n: int, mode: str = EXACT) -> "PolyMap":
        return cls(n, tuple(SparsePoly.variables(n, mode)))

    @classmethod
    def linear(cls, matrix, mode: str = EXACT) -> "PolyMap":
        n = len(matrix)
        zs = SparsePoly.variables(n, mode)
        comps = []
        for row in matrix:
            acc = SparsePoly.zero(n, mode)
            for a, z in zip(row, zs):
                acc = acc + z * a
            comps.append(acc)
        return cls(n, tuple(comps))

    @property
    def mode(self) -> str:
        return self.components[0].mode if self.components else EXACT

    def compose(self, other: "PolyMap") -> "PolyMap":
        """``self`` after ``other``."""
        if other.n != self.n:
            raise DimensionMismatch("maps of different dimension")
        return PolyMap(self.n, tuple(poly_compose(c, other.components) for c in self.components))

    def __call__(self, *x):
        return tuple(poly_eval(c, x) for c in self.components)

    def to_json(self) -> dict:
        return {"n": self.n, "components": [poly_to_json(c) for c in self.components]}

    @classmethod
    def from_json(cls, data: Mapping) -> "PolyMap":
        return cls(int(data["n"]), tuple(poly_from_json(c) for c in data["components"]))
