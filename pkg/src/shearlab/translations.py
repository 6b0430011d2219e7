"""Translations that push compacts off themselves.

Covers the diagonal translation of complex n-space (escape indices, separating
hyperplanes, the disjointness-plus-separation check for convex compacts), the
shear-like translations of a Danielewski surface ``x*y = p(z)``, and the
product-space examples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .polycore import (
    EXACT,
    PolyMap,
    QQi,
    SparsePoly,
    poly_compose,
    poly_derivative,
    poly_divide_exact,
    poly_eval,
    poly_eval_points,
    poly_gcd_univariate,
)
from .regions import Region, RegionError


def _exact_number(a) -> QQi:
    if isinstance(a, QQi):
        return a
    if isinstance(a, (float, complex)):
        return QQi.from_complex(a)
    return QQi(a)


def _exact_real(b) -> Fraction:
    if isinstance(b, float):
        return Fraction(b)
    return Fraction(b)


# ---------------------------------------------------------------------------
# Diagonal translation


@dataclass(frozen=True)
class DiagonalTranslation:
    """``z -> z + b*(1, ..., 1)`` on complex ``n``-space, ``b > 0``."""

    n: int
    b: float | int | Fraction

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if isinstance(self.b, (complex, QQi)) or not self.b > 0 or not math.isfinite(float(self.b)):
            raise ValueError("translation length b must be a positive real number")

    @property
    def b_exact(self) -> Fraction:
        return _exact_real(self.b)

    def shift(self, m: int = 1) -> np.ndarray:
        return np.full(self.n, float(self.b) * m, dtype=complex)

    def shift_exact(self, m: int = 1) -> list[QQi]:
        return [QQi(self.b_exact * m)] * self.n

    def apply(self, points: np.ndarray, m: int = 1) -> np.ndarray:
        return np.asarray(points, dtype=complex) + float(self.b) * m

    def polymap(self, m: int = 1) -> PolyMap:
        zs = SparsePoly.variables(self.n)
        s = self.b_exact * m
        return PolyMap(self.n, tuple(z + s for z in zs))

    def to_json(self) -> dict:
        b = self.b_exact
        return {"type": "translation", "n": self.n, "b": f"{b.numerator}/{b.denominator}"}


def escape_index(tau: DiagonalTranslation, K: Region) -> int:
    """Smallest ``m >= 1`` moving the first-coordinate real extent of ``K`` off itself.

    With width ``w`` of that extent this is ``floor(w/b) + 1``; the value is
    computed in exact arithmetic on the (binary) inputs.
    """
    lo, hi = K.real_extent(0)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise RegionError("region must be bounded")
    if hi < lo:
        raise RegionError("empty region")
    width = Fraction(hi) - Fraction(lo)
    return math.floor(width / tau.b_exact) + 1


@dataclass(frozen=True)
class EscapeCertificate:
    m: int
    interval: tuple[float, float]
    moved_interval: tuple[float, float]
    disjoint: bool

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "interval": list(self.interval),
            "moved_interval": list(self.moved_interval),
            "disjoint": self.disjoint,
        }


def escape_certificate(tau: DiagonalTranslation, K: Region, m: int) -> EscapeCertificate:
    lo, hi = K.real_extent(0)
    shift = Fraction(tau.b_exact * m)
    mlo, mhi = Fraction(lo) + shift, Fraction(hi) + shift
    disjoint = mlo > Fraction(hi) or mhi < Fraction(lo)
    return EscapeCertificate(m, (lo, hi), (float(mlo), float(mhi)), disjoint)


# ---------------------------------------------------------------------------
# Separating hyperplanes


@dataclass(frozen=True)
class SeparationCertificate:
    """``l(z) = Re sum conj(v_i) z_i`` with ``sup_K1 l < c < inf_K2 l`` when ``separated``."""

    separated: bool
    functional: tuple = ()
    threshold: float = float("nan")
    sup_first: float = float("nan")
    inf_second: float = float("nan")
    method: str = ""
    iterations: int = 0
    distance_estimate: float = float("nan")
    reason: str = ""

    @property
    def gap(self) -> float:
        return self.inf_second - self.sup_first

    def to_json(self) -> dict:
        out = {"separated": self.separated, "method": self.method, "iterations": self.iterations}
        if self.separated:
            out.update(
                functional=[[v.real, v.imag] for v in self.functional],
                threshold=self.threshold,
                sup_first=self.sup_first,
                inf_second=self.inf_second,
            )
        else:
            out["reason"] = self.reason
        if math.isfinite(self.distance_estimate):
            out["distance_estimate"] = self.distance_estimate
        return out


def _rdot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum((a * np.conj(b)).real))


def _try_functional(K1, K2, v: np.ndarray, method: str, iterations: int, dist=float("nan")):
    s1 = K1.support(v)
    i2 = -K2.support(-v)
    if s1 < i2:
        return SeparationCertificate(
            True, tuple(complex(x) for x in v), (s1 + i2) / 2, s1, i2, method, iterations, dist
        )
    return None


def separation_certificate(K1: Region, K2: Region, max_iter: int = 2000) -> SeparationCertificate:
    """Strictly separating real-linear functional for two convex compacts.

    Coordinate functionals ``+-Re z_k`` are tried first; otherwise the
    minimum-norm point of ``K1 - K2`` is approached by Gilbert's iteration
    (alternating support-point projections) and its direction is tested.
    """
    for K in (K1, K2):
        if not getattr(K, "convex", False):
            raise RegionError("separation certificates need convex compacts")
    if K1.dim != K2.dim:
        raise RegionError("regions of different dimension")
    n = K1.dim
    for k in range(n):
        for sign in (1.0, -1.0):
            v = np.zeros(n, complex)
            v[k] = sign
            cert = _try_functional(K1, K2, v, "coordinate", 0)
            if cert is not None:
                return cert

    x = K1.support_point(np.ones(n, complex)) - K2.support_point(-np.ones(n, complex))
    it = 0
    for it in range(1, max_iter + 1):
        norm2 = _rdot(x, x)
        if norm2 <= 1e-24:
            return SeparationCertificate(False, method="gilbert", iterations=it,
                                         distance_estimate=0.0, reason="hulls intersect")
        cert = _try_functional(K1, K2, -x / math.sqrt(norm2), "gilbert", it, math.sqrt(norm2))
        if cert is not None:
            return cert
        s = K1.support_point(-x) - K2.support_point(x)
        if norm2 - _rdot(s, x) <= 1e-12 * norm2:
            break
        d = s - x
        t = min(1.0, max(0.0, -_rdot(x, d) / _rdot(d, d)))
        x = x + t * d
    dist = math.sqrt(_rdot(x, x))
    reason = "hulls intersect" if dist < 1e-9 else "no strict separation found"
    return SeparationCertificate(False, method="gilbert", iterations=it,
                                 distance_estimate=dist, reason=reason)


@dataclass(frozen=True)
class ZajacVerdict:
    holds: bool
    escape: EscapeCertificate
    separation: SeparationCertificate

    def to_json(self) -> dict:
        return {
            "holds": self.holds,
            "escape": self.escape.to_json(),
            "separation": self.separation.to_json(),
        }


def zajac_check(tau: DiagonalTranslation, K: Region, m: int) -> ZajacVerdict:
    """Disjointness of ``K`` and its ``m``-th translate plus a separating hyperplane.

    Two disjoint convex compacts separated by a real hyperplane have a
    polynomially convex union, which is the sufficient condition used here.
    """
    if not getattr(K, "convex", False):
        raise RegionError("the check is defined for convex compacts")
    if m < 1:
        raise ValueError("m must be a positive integer")
    esc = escape_certificate(tau, K, m)
    sep = separation_certificate(K, K.translate(tau.shift(m)))
    return ZajacVerdict(esc.disjoint and sep.separated, esc, sep)


# ---------------------------------------------------------------------------
# Escape curves


@dataclass(frozen=True)
class EscapeCurve:
    ms: tuple
    values: tuple
    header: str = "m,min_distance"

    def to_csv(self) -> str:
        lines = [self.header]
        lines += [f"{m},{v!r}" for m, v in zip(self.ms, self.values)]
        return "\n".join(lines) + "\n"

    def strictly_increasing_from(self, m0: int) -> bool:
        vals = [v for m, v in zip(self.ms, self.values) if m >= m0]
        return all(b > a for a, b in zip(vals, vals[1:]))

    def to_json(self) -> dict:
        return {"m": list(self.ms), "min_distance": list(self.values)}


def escape_curve(step: Callable[[np.ndarray, int], np.ndarray], samples: np.ndarray,
                 m_range: Sequence[int]) -> EscapeCurve:
    """Minimum distance between ``step(samples, m)`` and ``samples`` for each ``m``."""
    base = np.asarray(samples, dtype=complex)
    values = []
    for m in m_range:
        moved = np.asarray(step(base, m), dtype=complex)
        diff = moved[:, None, :] - base[None, :, :]
        values.append(float(np.sqrt(np.min(np.sum(np.abs(diff) ** 2, axis=2)))))
    return EscapeCurve(tuple(int(m) for m in m_range), tuple(values))


# ---------------------------------------------------------------------------
# Danielewski surfaces

X, Y, Z = 0, 1, 2


@dataclass(frozen=True)
class DanielewskiSurface:
    """The surface ``x*y = p(z)`` in complex 3-space, ``p`` square-free."""

    p: SparsePoly

    def __post_init__(self):
        p = self.p
        if p.nvars != 1:
            raise ValueError("p must be a univariate polynomial")
        if p.mode != EXACT:
            p = p.to_exact()
            object.__setattr__(self, "p", p)
        if p.degree < 1:
            raise ValueError("p must have degree at least 1")
        g = poly_gcd_univariate(p, poly_derivative(p, 0))
        if g.degree > 0:
            raise ValueError(f"p is not square-free (gcd with p' is {g})")

    @property
    def p3(self) -> SparsePoly:
        """``p`` as a polynomial in ``(x, y, z)``."""
        return self.p.embed(3, [Z])

    @property
    def relation(self) -> SparsePoly:
        x, y, _ = SparsePoly.variables(3)
        return x * y - self.p3

    def residual(self, x, y, z):
        return x * y - poly_eval(self.p, [z])

    def contains(self, pt, tol: float = 1e-10) -> bool:
        x, y, z = pt
        if all(isinstance(v, (int, Fraction, QQi)) for v in pt):
            return not self.residual(QQi.coerce(x), QQi.coerce(y), QQi.coerce(z))
        pf = self.p.to_float()
        return abs(complex(x) * complex(y) - complex(poly_eval(pf, [complex(z)]))) < tol

    def point(self, x, y, z) -> "SurfacePoint":
        if not self.contains((x, y, z)):
            raise ValueError(f"({x}, {y}, {z}) is not on the surface")
        return SurfacePoint(x, y, z)

    def normal_form(self, f: SparsePoly) -> SparsePoly:
        """Remainder modulo ``x*y - p(z)``: every ``x*y`` is replaced by ``p(z)``.

        ``{x*y - p(z)}`` is a Groebner basis of its (prime) ideal for lex order
        with ``x > y > z``, so two polynomials agree on the surface exactly when
        their normal forms coincide.
        """
        p3 = self.p3
        pw = {0: SparsePoly.constant(1, 3)}
        out = SparsePoly.zero(3)
        plain = {}
        for e, c in f.terms.items():
            t = min(e[X], e[Y])
            if not t:
                plain[e] = c
                continue
            if t not in pw:
                pw[t] = p3 ** t
            mono = SparsePoly(3, {(e[X] - t, e[Y] - t, e[Z]): c})
            out = out + mono * pw[t]
        return out + SparsePoly(3, plain)

    def maps_equal(self, F: PolyMap, G: PolyMap) -> bool:
        return all(
            self.normal_form(a - b).is_zero() for a, b in zip(F.components, G.components)
        )

    def to_json(self) -> dict:
        from .polycore import poly_to_json

        return {"p": poly_to_json(self.p)}


@dataclass(frozen=True)
class SurfacePoint:
    x: complex | QQi
    y: complex | QQi
    z: complex | QQi

    def as_tuple(self):
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class DanielewskiTranslation:
    """``(x, y, z) -> (x, y + q(x, z), z + a*x)`` with ``q = (p(z + a x) - p(z)) / x``."""

    surface: DanielewskiSurface
    a: QQi
    q: SparsePoly
    map: PolyMap

    def __call__(self, x, y, z):
        return self.map(x, y, z)

    def apply_float(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=complex)
        qv = poly_eval_points(self.q, pts)
        a = complex(self.a)
        return np.stack([pts[:, 0], pts[:, 1] + qv, pts[:, 2] + a * pts[:, 0]], axis=1)

    def invariance_residual(self) -> SparsePoly:
        """``x*y' - p(z')`` minus ``x*y - p(z)``; the zero polynomial when invariant."""
        x = SparsePoly.var(X, 3)
        _, y2, z2 = self.map.components
        moved = x * y2 - poly_compose(self.surface.p, [z2])
        return moved - self.surface.relation

    def to_json(self) -> dict:
        return {"a": [str(self.a.re), str(self.a.im)], "map": self.map.to_json()}


def danielewski_translation(S: DanielewskiSurface, a) -> DanielewskiTranslation:
    a = _exact_number(a)
    if not a:
        raise ValueError("a must be nonzero")
    return _translation(S, a)


def _translation(S: DanielewskiSurface, a: QQi) -> DanielewskiTranslation:
    x, y, z = SparsePoly.variables(3)
    p3 = S.p3
    shifted = poly_compose(S.p, [z + x * a])
    q = poly_divide_exact(shifted - p3, x) if a else SparsePoly.zero(3)
    return DanielewskiTranslation(S, a, q, PolyMap(3, (x, y + q, z + x * a)))


@dataclass(frozen=True)
class CocycleVerdict:
    holds: bool
    polynomial_identity: bool
    surface_identity: bool
    a: QQi
    b: QQi

    def to_json(self) -> dict:
        return {
            "holds": self.holds,
            "polynomial_identity": self.polynomial_identity,
            "surface_identity": self.surface_identity,
            "a": str(self.a),
            "b": str(self.b),
        }


def danielewski_cocycle_check(S: DanielewskiSurface, a, b) -> CocycleVerdict:
    """Exact check of ``tau_a o tau_b = tau_(a+b)`` (``tau_0`` is the identity)."""
    a, b = _exact_number(a), _exact_number(b)
    if not a or not b:
        raise ValueError("a and b must be nonzero")
    lhs = _translation(S, a).map.compose(_translation(S, b).map)
    rhs = _translation(S, a + b).map
    poly_ok = lhs == rhs
    surf_ok = S.maps_equal(lhs, rhs)
    return CocycleVerdict(poly_ok or surf_ok, poly_ok, surf_ok, a, b)


def danielewski_power(S: DanielewskiSurface, a, m: int) -> PolyMap:
    """``tau_a`` composed with itself ``m >= 0`` times."""
    t = _translation(S, _exact_number(a)).map
    out = PolyMap.identity(3)
    for _ in range(m):
        out = t.compose(out)
    return out


def surface_sample(S: DanielewskiSurface, count: int = 50, seed: int = 0,
                   radius: float = 1.0, y_bound: float = 4.0) -> np.ndarray:
    """Deterministic points of the surface in a bounded box.

    A few points sit on the fibre ``x = 0`` over roots of ``p``; the rest have
    ``x != 0`` and ``y = p(z)/x``.
    """
    rng = np.random.default_rng(seed)
    pf = S.p.to_float()
    coeffs = [complex(pf.coeff((k,))) for k in range(S.p.degree, -1, -1)]
    roots = np.roots(coeffs)
    pts = []
    for k, r in enumerate(roots[: max(1, count // 10)]):
        pts.append((0j, complex(0.5 * (k + 1), 0.25), complex(r)))
    while len(pts) < count:
        x = complex(*rng.uniform(-radius, radius, 2))
        z = complex(*rng.uniform(-radius, radius, 2))
        if abs(x) < 0.1:
            continue
        y = complex(poly_eval(pf, [z])) / x
        if abs(y) <= y_bound:
            pts.append((x, y, z))
    return np.array(pts[:count], dtype=complex)


def surface_escape_probe(S: DanielewskiSurface, a, samples, m_range: Sequence[int],
                         tol: float = 1e-9) -> EscapeCurve:
    """Minimum distance between ``tau_a^m(K)`` and ``K`` for each ``m`` (``K`` = samples)."""
    pts = np.asarray(
        [[complex(v) for v in (s.as_tuple() if isinstance(s, SurfacePoint) else s)] for s in samples],
        dtype=complex,
    )
    pf = S.p.to_float()
    resid = np.abs(pts[:, 0] * pts[:, 1] - poly_eval_points(pf, pts[:, 2:3]))
    if np.any(resid >= tol * np.maximum(1.0, np.abs(pts[:, 0] * pts[:, 1]))):
        bad = int(np.argmax(resid))
        raise ValueError(f"sample {bad} is off the surface (residual {resid[bad]:.3g})")
    a = _exact_number(a)
    cache: dict[int, DanielewskiTranslation] = {}

    def step(base, m):
        if m == 0:
            return base
        if m not in cache:
            cache[m] = _translation(S, a * m)
        return cache[m].apply_float(base)

    return escape_curve(step, pts, m_range)


# ---------------------------------------------------------------------------
# Product examples

PRODUCT_KINDS = {"C×Y": "C", "CxY": "C", "C": "C",
                 "C*×C*×Y": "C*C*", "C*xC*xY": "C*C*", "C*C*": "C*C*"}


@dataclass(frozen=True)
class ProductTranslation:
    """Translation on the flexible factor of a product; further coordinates are inert."""

    kind: str
    a: complex
    factor_map: PolyMap = field(repr=False)

    @property
    def factor_dim(self) -> int:
        return self.factor_map.n

    def apply(self, points: np.ndarray, m: int = 1) -> np.ndarray:
        pts = np.array(points, dtype=complex, copy=True)
        if self.kind == "C":
            pts[:, 0] += m * self.a
        else:
            pts[:, 0] *= self.a ** m
            pts[:, 1] /= self.a ** m
        return pts

    def modulus_intervals(self, rmin: float, rmax: float, m: int):
        """Moduli ranges of the two ``C*`` factors after ``m`` steps, for an annulus sample."""
        if self.kind != "C*C*":
            raise ValueError("moduli only make sense on the C* factors")
        s = abs(self.a) ** m
        return (rmin * s, rmax * s), (rmin / s, rmax / s)

    def escape_curve(self, samples: np.ndarray, m_range: Sequence[int]) -> EscapeCurve:
        k = self.factor_dim
        base = np.asarray(samples, dtype=complex)[:, :k]
        return escape_curve(lambda pts, m: self.apply(pts, m), base, m_range)


def product_translation(kind: str, a) -> ProductTranslation:
    try:
        tag = PRODUCT_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown product kind {kind!r}") from None
    ax = _exact_number(a)
    if not ax:
        raise ValueError("a must be nonzero")
    if tag == "C":
        (z,) = SparsePoly.variables(1)
        return ProductTranslation(tag, complex(ax), PolyMap(1, (z + ax,)))
    if ax.abs2() == 1:
        raise ValueError("|a| = 1 does not move compacts of C* off themselves")
    z, w = SparsePoly.variables(2)
    return ProductTranslation(tag, complex(ax), PolyMap(2, (z * ax, w * (QQi(1) / ax))))
