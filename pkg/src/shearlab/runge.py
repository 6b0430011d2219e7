"""Polynomial approximation on separated discs and the staged Birkhoff series.

A blending polynomial ``phi`` (close to 1 on some discs, close to 0 on others)
is fitted by weighted least squares on boundary samples in a Vandermonde
with Arnoldi basis.  The fitted combination is converted to exact dyadic
monomial coefficients by replaying the Arnoldi recurrence in fixed-point
integer arithmetic, and the exact polynomial is certified disc by disc:
it is re-expanded exactly around each disc centre, rounded once to doubles,
sampled densely on the boundary circle, and the sample maximum is inflated
by a derivative (modulus of continuity) slack and a rounding slack.  By the
maximum principle the boundary bound holds on the whole disc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .polycore import (
    QQi,
    SparsePoly,
    affine_substitute_ints,
    ints_to_complex,
    local_expansion,
    poly_eval_points,
    poly_to_json,
    poly_translate,
    sup_bound_polydisc,
)
from .regions import GridSpec, Polydisc, Region, RegionError, polydisc_hull
from .translations import DiagonalTranslation, escape_index

BLOCKS = (64, 128, 256, 512)
_EPS = 2.0 ** -53


class RungeInfeasible(RuntimeError):
    """Tolerance not reached within the degree budget; ``best`` holds the closest attempt."""

    def __init__(self, message: str, best=None, stage: int | None = None):
        super().__init__(message)
        self.best = best
        self.stage = stage


# ---------------------------------------------------------------------------
# Boundary least squares


@dataclass(frozen=True)
class Disc:
    center: complex
    radius: float

    def to_json(self) -> dict:
        return {"center": [self.center.real, self.center.imag], "radius": self.radius}


def _block_for(degree: int) -> int:
    for b in BLOCKS:
        if degree <= b:
            return b
    raise RungeInfeasible(f"degree {degree} exceeds the largest fitting block {BLOCKS[-1]}")


def _fit_samples(block: int) -> int:
    return 2 * block + 16


class _BoundaryFit:
    """Weighted Arnoldi basis on boundary samples of several discs.

    Columns are orthonormal for the weighted sample inner product, so the
    least-squares coefficients are plain projections and truncating them
    gives the least-squares fit of every lower degree.
    """

    def __init__(self, discs: Sequence[Disc], values: Sequence[float], tols: Sequence[float], block: int):
        self.discs = list(discs)
        self.block = block
        self.m_fit = _fit_samples(block)
        lo = min(d.center.real - d.radius for d in discs)
        hi = max(d.center.real + d.radius for d in discs)
        ilo = min(d.center.imag - d.radius for d in discs)
        ihi = max(d.center.imag + d.radius for d in discs)
        self.C = complex((lo + hi) / 2, (ilo + ihi) / 2)
        reach = max(abs(d.center - self.C) + d.radius for d in discs)
        self.S = 2.0 ** math.ceil(math.log2(reach)) if reach > 0 else 1.0
        self.real = all(d.center.imag == 0 for d in discs) and self.C.imag == 0
        M = self.m_fit
        theta = 2 * np.pi * (np.arange(M) + 0.5) / M
        theta_v = 2 * np.pi * np.arange(M) / M
        pts, vpts, wts, vals, owner_v = [], [], [], [], []
        for idx, (d, v, t) in enumerate(zip(discs, values, tols)):
            pts.append(d.center + d.radius * np.exp(1j * theta))
            vpts.append(d.center + d.radius * np.exp(1j * theta_v))
            wts.append(np.full(M, 1.0 / t))
            vals.append(np.full(M, float(v)))
            owner_v.append(np.full(M, idx))
        self.w = (np.concatenate(pts) - self.C) / self.S
        self.wv = (np.concatenate(vpts) - self.C) / self.S
        w2 = np.concatenate(wts) ** 2
        self.w2 = w2 / np.sum(w2)
        self.vals = np.concatenate(vals)
        self.vals_v = np.concatenate([np.full(M, float(v)) for v in values])
        self.owner_v = np.concatenate(owner_v)
        n = block + 1
        self.Q = np.zeros((len(self.w), n), complex)
        self.Qv = np.zeros((len(self.wv), n), complex)
        self.H = np.zeros((n, n), complex)
        self.rho = np.zeros(n)
        self.Q[:, 0] = 1.0
        self.Qv[:, 0] = 1.0
        self.top = 0
        self.coef = np.zeros(n, complex)
        self.coef[0] = np.sum(self.w2 * self.vals)

    def extend(self, degree: int) -> None:
        Q, Qv, H, w2 = self.Q, self.Qv, self.H, self.w2
        for k in range(self.top, degree):
            q = self.w * Q[:, k]
            for _ in range(2):
                h = Q[:, : k + 1].conj().T @ (w2 * q)
                H[: k + 1, k] += h
                q = q - Q[:, : k + 1] @ h
            if self.real:
                H[: k + 1, k] = H[: k + 1, k].real
            nrm = math.sqrt(float(np.sum(w2 * np.abs(q) ** 2)))
            if nrm == 0:
                raise RungeInfeasible("Arnoldi breakdown: too few distinct samples")
            rho = 1.0 / nrm
            self.rho[k] = rho
            H[k + 1, k] = nrm
            Q[:, k + 1] = q * rho
            qv = self.wv * Qv[:, k] - Qv[:, : k + 1] @ H[: k + 1, k]
            Qv[:, k + 1] = qv * rho
            c = np.sum(np.conj(Q[:, k + 1]) * w2 * self.vals)
            self.coef[k + 1] = c.real if self.real else c
        if self.real:
            self.coef[0] = self.coef[0].real
        self.top = max(self.top, degree)

    def estimate(self, degree: int) -> np.ndarray:
        """Float sup errors per disc at the staggered check points."""
        self.extend(degree)
        approx = self.Qv[:, : degree + 1] @ self.coef[: degree + 1]
        err = np.abs(approx - self.vals_v)
        return np.array([np.max(err[self.owner_v == i]) for i in range(len(self.discs))])

    def exact_coefficients(self, degree: int) -> "DyadicPoly":
        self.extend(degree)
        return _replay_recurrence(self.H, self.rho, self.coef, degree, self.real, self.C, self.S)


def _mantissas(x: np.ndarray, real: bool):
    """Integers ``(re, im)`` and a shift ``E`` with ``x ~= (re + i*im) / 2**E`` to 53 bits."""
    mag = float(np.max(np.abs(x))) if x.size else 0.0
    if mag == 0 or not math.isfinite(mag):
        E = 0
    else:
        E = 52 - math.frexp(mag)[1]
    re = [int(round(math.ldexp(float(v), E))) for v in x.real]
    im = [0] * len(re) if real else [int(round(math.ldexp(float(v), E))) for v in x.imag]
    return np.array(re, dtype=object), np.array(im, dtype=object), E


@dataclass(frozen=True)
class DyadicPoly:
    """``sum (re_k + i im_k) / 2**P * w**k`` with ``w = (z - C) / S``."""

    re: tuple
    im: tuple
    P: int
    C: complex
    S: float

    @property
    def degree(self) -> int:
        return len(self.re) - 1

    def local_coefficients(self, center: complex, radius: float, subtract: float = 0.0) -> np.ndarray:
        """Doubles of the Taylor coefficients of ``p(center + radius*u) - subtract``."""
        alpha = (QQi.from_complex(center) - QQi.from_complex(self.C)) / QQi.from_complex(self.S)
        beta = QQi.from_complex(radius) / QQi.from_complex(self.S)
        r, i, e = affine_substitute_ints(list(self.re), list(self.im), alpha, beta)
        den = e << self.P
        if subtract:
            r[0] -= int(Fraction(subtract) * den)
        return ints_to_complex(r, i, den)

    def to_poly(self) -> SparsePoly:
        """The same polynomial in the original variable ``z`` (exact)."""
        alpha = -QQi.from_complex(self.C) / QQi.from_complex(self.S)
        beta = QQi(1) / QQi.from_complex(self.S)
        r, i, e = affine_substitute_ints(list(self.re), list(self.im), alpha, beta)
        den = e << self.P
        coeffs = [QQi(Fraction(a, den), Fraction(b, den)) for a, b in zip(r, i)]
        return SparsePoly.univariate(coeffs)


def _replay_recurrence(H, rho, coef, degree, real, C, S) -> DyadicPoly:
    """Monomial coefficients of ``sum coef_k q_k`` by fixed-point replay of the recurrence.

    ``q_(k+1) = rho_k (w q_k - sum_(j<=k) H_jk q_j)``.  Intermediate values
    carry an absolute precision of ``2**-P`` with ``P`` chosen above the
    growth of the monomial coefficients, so the rounding left in the final
    dyadic coefficients is far below double precision on the fitted discs.
    """
    n = degree
    # float pass to size the fixed-point precision
    R = np.zeros((n + 1, n + 1), complex)
    R[0, 0] = 1.0
    with np.errstate(all="ignore"):
        for k in range(n):
            t = np.zeros(n + 1, complex)
            t[1:] = R[:-1, k]
            t -= R[:, : k + 1] @ H[: k + 1, k]
            R[:, k + 1] = t * rho[k]
        peak = float(np.max(np.abs(R)))
    growth = math.frexp(peak)[1] if math.isfinite(peak) and peak > 0 else 4 * n + 64
    P = 112 + max(growth, 0)
    Rr = np.zeros((n + 1, n + 1), dtype=object)
    Ri = np.zeros((n + 1, n + 1), dtype=object)
    Rr[:, :] = 0
    Ri[:, :] = 0
    Rr[0, 0] = 1 << P
    for k in range(n):
        hr, hi, E = _mantissas(H[: k + 1, k], real)
        top = k + 1
        br = Rr[:top, :top]
        bi = Ri[:top, :top]
        sub_r = br.dot(hr) - (bi.dot(hi) if not real else 0)
        tr = np.zeros(top + 1, dtype=object)
        tr[1:] = Rr[:top, k]
        tr[:top] -= _shift(sub_r, E)
        m, e2 = _mantissa_scalar(rho[k])
        Rr[: top + 1, k + 1] = _shift(tr * m, e2)
        if not real:
            sub_i = br.dot(hi) + bi.dot(hr)
            ti = np.zeros(top + 1, dtype=object)
            ti[1:] = Ri[:top, k]
            ti[:top] -= _shift(sub_i, E)
            Ri[: top + 1, k + 1] = _shift(ti * m, e2)
    cr, ci, Ec = _mantissas(coef[: n + 1], real)
    ar = Rr.dot(cr) - (Ri.dot(ci) if not real else 0)
    ai = np.zeros(n + 1, dtype=object) if real else Rr.dot(ci) + Ri.dot(cr)
    ar = _shift(ar, Ec)
    ai = _shift(ai, Ec) if not real else ai
    return DyadicPoly(tuple(int(x) for x in ar), tuple(int(x) for x in ai), P, C, S)


def _mantissa_scalar(x: float):
    E = 52 - math.frexp(x)[1]
    return int(round(math.ldexp(x, E))), E


def _shift(arr, E: int):
    if isinstance(arr, np.ndarray):
        return np.array([_shift(int(v), E) for v in arr], dtype=object)
    return arr >> E if E >= 0 else arr << (-E)


# ---------------------------------------------------------------------------
# Certification


@dataclass(frozen=True)
class DiscBound:
    """Certified bound of ``|phi - target|`` on a closed disc."""

    disc: Disc
    target: float
    sample_max: float
    lipschitz_slack: float
    rounding_slack: float
    samples: int

    @property
    def bound(self) -> float:
        return self.sample_max + self.lipschitz_slack + self.rounding_slack

    def to_json(self) -> dict:
        return {
            "disc": self.disc.to_json(),
            "target": self.target,
            "bound": self.bound,
            "sample_max": self.sample_max,
            "lipschitz_slack": self.lipschitz_slack,
            "rounding_slack": self.rounding_slack,
            "samples": self.samples,
        }


def certify_coefficients(q: np.ndarray, disc: Disc, target: float, min_samples: int,
                         goal: float, max_samples: int = 1 << 16) -> DiscBound:
    """Bound ``max_{|u|<=1} |sum q_k u^k|`` from boundary samples.

    Any boundary point lies within arc ``pi/M`` of a sample, the derivative
    on the closed disc is at most ``sum k|q_k|``, and Horner plus coefficient
    rounding contribute at most ``(4n + 8) * 2**-53 * sum |q_k|``.
    """
    absq = np.abs(q)
    n = len(q) - 1
    lip = float(np.sum(np.arange(n + 1) * absq)) * (1 + 1e-12)
    l1 = float(np.sum(absq))
    M = max(min_samples, 8)
    if goal > 0 and math.isfinite(lip):
        need = math.ceil(4 * math.pi * lip / goal)
        M = max(M, min(need, max_samples))
    u = np.exp(2j * np.pi * np.arange(M) / M)
    vals = np.polynomial.polynomial.polyval(u, q)
    sample_max = float(np.max(np.abs(vals)))
    return DiscBound(disc, target, sample_max, lip * math.pi / M, (4 * n + 8) * _EPS * l1 * 1.01, M)


def _certify(poly: DyadicPoly, disc: Disc, target: float, min_samples: int, goal: float) -> DiscBound:
    q = poly.local_coefficients(disc.center, disc.radius, subtract=target)
    return certify_coefficients(q, disc, target, min_samples, goal)


def certify_sparse(p: SparsePoly, disc: Disc, target: SparsePoly | None = None,
                   min_samples: int = 256, goal: float = 0.0) -> DiscBound:
    """Certified ``sup |p - target|`` on a disc for univariate exact ``p``."""
    diff = p if target is None else p - target
    q = local_expansion(diff, disc.center, disc.radius)
    return certify_coefficients(q, disc, 0.0, min_samples, goal)


@dataclass
class BlendResult:
    phi: SparsePoly | None
    degree: int
    bounds: list
    tolerances: list
    fit_samples: int
    success: bool
    estimated: bool = False

    @property
    def ratio(self) -> float:
        return max((b.bound / t for b, t in zip(self.bounds, self.tolerances)), default=0.0)

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "success": self.success,
            "fit_samples_per_disc": self.fit_samples,
            "discs": [b.to_json() | {"tolerance": t} for b, t in zip(self.bounds, self.tolerances)],
        }


def _trivial(discs, values, tols) -> BlendResult | None:
    for const in (1, 0):
        errs = [abs(const - v) for v in values]
        if all(e <= t for e, t in zip(errs, tols)):
            bounds = [DiscBound(d, v, e, 0.0, 0.0, 0) for d, v, e in zip(discs, values, errs)]
            return BlendResult(SparsePoly.constant(const, 1), 0, bounds, list(tols), 0, True)
    return None


def blend(discs: Sequence[Disc], values: Sequence[float], tols: Sequence[float], max_degree: int,
          step: int = 4, certify_all: bool = False, accept: float = 0.5) -> BlendResult:
    """Polynomial close to ``values[i]`` (0 or 1) on ``discs[i]`` within ``tols[i]``.

    Degrees ``step, 2*step, ...`` are tried in order.  A degree is certified
    when the float estimate is within ``accept`` of every tolerance (or, with
    ``certify_all``, whenever it beats the best certified attempt so far) and
    the first certified success is returned.  On failure the best certified
    attempt is returned with ``success=False``.
    """
    discs = list(discs)
    tols = [float(t) for t in tols]
    trivial = _trivial(discs, values, tols)
    if trivial is not None:
        return trivial
    best: BlendResult | None = None
    best_est: tuple | None = None
    fit = None
    for degree in range(step, max_degree + 1, step):
        block = _block_for(degree)
        if fit is None or fit.block != block:
            fit = _BoundaryFit(discs, values, tols, block)
        est = fit.estimate(degree)
        est_ratio = float(np.max(est / np.array(tols)))
        if best_est is None or est_ratio < best_est[0]:
            best_est = (est_ratio, degree, est)
        wanted = est_ratio <= accept or (certify_all and (best is None or est_ratio < best.ratio))
        if not wanted:
            continue
        dp = fit.exact_coefficients(degree)
        bounds = [
            _certify(dp, d, v, 4 * fit.m_fit, t * 0.05) for d, v, t in zip(discs, values, tols)
        ]
        ok = all(b.bound <= t for b, t in zip(bounds, tols))
        result = BlendResult(None, degree, bounds, tols, fit.m_fit, ok)
        if ok:
            result.phi = dp.to_poly()
            return result
        if best is None or result.ratio < best.ratio:
            result.phi = dp.to_poly() if certify_all else None
            best = result
    if best is None and best_est is not None:
        ratio, degree, est = best_est
        bounds = [DiscBound(d, v, float(e), 0.0, 0.0, 0) for d, v, e in zip(discs, values, est)]
        best = BlendResult(None, degree, bounds, tols, _fit_samples(_block_for(degree)), False, True)
    if best is None:
        best = BlendResult(None, 0, [], tols, 0, False, True)
    return best


# ---------------------------------------------------------------------------
# Public two-piece API


def _disc_of(K: Region, axis: int) -> Disc:
    if not isinstance(K, Polydisc):
        raise RegionError("pieces must be discs or polydiscs")
    return Disc(complex(K.center[axis]), float(K.radii[axis]))


@dataclass(frozen=True)
class DisjointPair:
    """Two polydiscs whose projections to coordinate ``axis`` are disjoint discs."""

    K1: Polydisc
    K2: Polydisc
    axis: int = 0

    def __post_init__(self):
        if self.K1.dim != self.K2.dim:
            raise RegionError("pieces of different dimension")
        if not 0 <= self.axis < self.K1.dim:
            raise RegionError("separating coordinate out of range")
        if self.separation <= 0:
            raise RegionError(
                f"projections overlap in coordinate {self.axis} (gap {self.separation:.6g})"
            )

    @property
    def dim(self) -> int:
        return self.K1.dim

    @property
    def discs(self) -> tuple[Disc, Disc]:
        return _disc_of(self.K1, self.axis), _disc_of(self.K2, self.axis)

    @property
    def separation(self) -> float:
        d1, d2 = _disc_of(self.K1, self.axis), _disc_of(self.K2, self.axis)
        return abs(d1.center - d2.center) - d1.radius - d2.radius

    @property
    def hyperplane(self) -> tuple[complex, float]:
        """Direction ``v`` and level ``c`` with ``Re(conj(v) z_axis) = c`` between the discs."""
        d1, d2 = self.discs
        v = (d2.center - d1.center) / abs(d2.center - d1.center)
        lo = (np.conj(v) * d1.center).real + d1.radius
        hi = (np.conj(v) * d2.center).real - d2.radius
        return complex(v), float((lo + hi) / 2)

    def to_json(self) -> dict:
        return {"K1": self.K1.to_json(), "K2": self.K2.to_json(), "axis": self.axis,
                "separation": self.separation}


@dataclass(frozen=True)
class PiecewiseTarget:
    h1: SparsePoly
    h2: SparsePoly

    def __post_init__(self):
        if self.h1.nvars != self.h2.nvars:
            raise ValueError("targets must use the same variables")


@dataclass(frozen=True)
class ApproxCertificate:
    p: SparsePoly
    degree: int
    err1: float
    err2: float
    tolerance: float
    reached: bool
    fit_samples: int
    validation_samples: int
    details: tuple = ()

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "err1": self.err1,
            "err2": self.err2,
            "tolerance": self.tolerance,
            "reached": self.reached,
            "fit_samples_per_disc": self.fit_samples,
            "validation_samples_per_disc": self.validation_samples,
            "details": list(self.details),
            "p": poly_to_json(self.p),
        }


def _embed_axis(phi: SparsePoly, dim: int, axis: int) -> SparsePoly:
    return phi if dim == 1 else phi.embed(dim, [axis])


def blend_coefficient(pair: DisjointPair, eps: float, max_degree: int = 128) -> ApproxCertificate:
    """``phi`` in the separating coordinate with ``|phi - 1| <= eps`` on K1 and ``|phi| <= eps`` on K2.

    The certified error is monotone in ``max_degree``: the same degree ladder
    and sample sets are used for every budget and the best certificate is kept.
    """
    if not eps > 0:
        raise ValueError("tolerance must be positive")
    d1, d2 = pair.discs
    res = blend([d1, d2], [1.0, 0.0], [eps, eps], max_degree, step=4, certify_all=True)
    cert = _certificate(pair, res, eps)
    if not res.success:
        raise RungeInfeasible(
            f"tolerance {eps:g} not reached up to degree {max_degree} "
            f"(best errors {cert.err1:.3g}, {cert.err2:.3g} at degree {cert.degree})",
            best=cert,
        )
    return cert


def _certificate(pair: DisjointPair, res: BlendResult, eps: float) -> ApproxCertificate:
    phi = res.phi if res.phi is not None else SparsePoly.zero(1)
    b1, b2 = (res.bounds + [None, None])[:2]
    err1 = b1.bound if b1 else float("inf")
    err2 = b2.bound if b2 else float("inf")
    val = max((b.samples for b in res.bounds), default=0)
    return ApproxCertificate(
        _embed_axis(phi, pair.dim, pair.axis), res.degree, err1, err2, eps, res.success,
        res.fit_samples, val, tuple(b.to_json() for b in res.bounds),
    )


def runge_piecewise(pair: DisjointPair, target: PiecewiseTarget, eps: float,
                    max_degree: int = 128) -> ApproxCertificate:
    """``p = h1*phi + h2*(1 - phi)`` approximating ``h1`` on K1 and ``h2`` on K2.

    On K1, ``|p - h1| = |1 - phi| |h1 - h2|`` and on K2 ``|p - h2| = |phi| |h1 - h2|``,
    so the certified errors are the blend errors times a certified bound for
    ``|h1 - h2|`` on each piece.
    """
    h1, h2 = target.h1, target.h2
    if h1.nvars != pair.dim:
        raise ValueError("targets must live in the ambient dimension of the pair")
    h1, h2 = h1.to_exact(), h2.to_exact()
    diff = h1 - h2
    if diff.is_zero():
        return ApproxCertificate(h1, max(h1.degree, 0), 0.0, 0.0, eps, True, 0, 0)
    n1 = sup_bound_polydisc(diff, pair.K1.center, pair.K1.radii)
    n2 = sup_bound_polydisc(diff, pair.K2.center, pair.K2.radii)
    norm_all = max(sup_bound_polydisc(h, K.center, K.radii)
                   for h in (h1, h2) for K in (pair.K1, pair.K2))
    inner = eps / (1 + 2 * norm_all)
    d1, d2 = pair.discs
    tols = [min(inner, eps / n1) if n1 else inner, min(inner, eps / n2) if n2 else inner]
    res = blend([d1, d2], [1.0, 0.0], tols, max_degree, step=4)
    if not res.success:
        raise RungeInfeasible(f"blend tolerance {min(tols):.3g} not reached up to degree {max_degree}",
                              best=_certificate(pair, res, eps))
    phi = _embed_axis(res.phi, pair.dim, pair.axis)
    p = h1 * phi + h2 * (1 - phi)
    err1 = res.bounds[0].bound * n1
    err2 = res.bounds[1].bound * n2
    return ApproxCertificate(p, p.degree, err1, err2, eps, err1 <= eps and err2 <= eps,
                             res.fit_samples, max(b.samples for b in res.bounds),
                             tuple(b.to_json() for b in res.bounds))


# ---------------------------------------------------------------------------
# Staged series (Birkhoff construction)

Target = SparsePoly | Callable[[int], SparsePoly] | None


@dataclass
class Slot:
    """One far disc of a stage: ``fn`` must approximate ``target`` after translating by ``m``."""

    fn: int
    m: int
    target: SparsePoly
    piece: Polydisc
    name: str = ""


@dataclass
class StagePlan:
    index: int
    compact: Polydisc
    tolerance: float
    slots: list


@dataclass
class TermRecord:
    fn: int
    stage: int
    poly: SparsePoly
    blends: list
    own: dict
    small: dict

    def to_json(self) -> dict:
        return {
            "function": self.fn,
            "stage": self.stage,
            "degree": self.poly.degree,
            "blends": [b.to_json() for b in self.blends],
            "own_error": {str(k): v for k, v in self.own.items()},
            "smallness": {str(k): v for k, v in self.small.items()},
        }


@dataclass
class Condition:
    """``|fn o tau^m - target| <= bound`` on the stage compact."""

    stage: int
    fn: int
    slot: str
    m: int
    target: SparsePoly
    own: float
    earlier: float
    tail: float
    measured: float
    tolerance: float

    @property
    def bound(self) -> float:
        return self.own + self.earlier + self.tail

    @property
    def holds(self) -> bool:
        return self.bound <= self.tolerance and self.measured <= self.tolerance

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "function": "fg"[self.fn] if self.fn < 2 else str(self.fn),
            "slot": self.slot,
            "m": self.m,
            "target": poly_to_json(self.target),
            "bound": self.bound,
            "own": self.own,
            "earlier_terms": self.earlier,
            "tail_bound": self.tail,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "holds": self.holds,
        }


@dataclass
class SeriesResult:
    functions: list
    seeds: list
    stages: list
    terms: list
    conditions: list

    def partial_sum(self, fn: int, upto: int) -> SparsePoly:
        acc = self.seeds[fn]
        for t in self.terms:
            if t.fn == fn and t.stage <= upto:
                acc = acc + t.poly
        return acc


def _piece_key(piece: Polydisc):
    return (piece.center, piece.radii)


def build_stage_terms(shift: Fraction, st: StagePlan, later: Sequence[Slot], seeds: Sequence[SparsePoly],
                      mu: float, max_degree: int = 400) -> list[TermRecord]:
    """Stage-``st`` terms of every function.

    The term of function ``F`` is ``sum_p phi_p * T_p`` over the far discs
    ``p`` of the stage where ``T_p = target o tau^-m - seed_F`` is nonzero.
    Each ``phi_p`` is close to 1 on ``p`` (tolerance ``tol / 4``), close to 0
    on the other active discs (``tol / 4`` shared) and below ``mu`` on the
    stage compact, the inactive discs and every ``later`` far disc.
    """
    nf = len(seeds)
    dim = seeds[0].nvars
    shift = Fraction(shift)
    terms = []
    for fn in range(nf):
        active, inactive = [], []
        for slot in st.slots:
            tgt = slot.target if slot.fn == fn else SparsePoly.zero(dim)
            T = poly_translate(tgt, [QQi(-shift * slot.m)] * dim) - seeds[fn]
            (active if not T.is_zero() else inactive).append((slot, T))
        if not active:
            continue
        zero_pieces = [st.compact] + [s.piece for s, _ in inactive] + [s.piece for s in later]
        A = len(active)
        poly = SparsePoly.zero(dim)
        blends = []
        contributions: dict = {}
        for p_slot, T in active:
            others = [s.piece for s, _ in active if s is not p_slot]
            pieces = [p_slot.piece] + others + zero_pieces
            norms = [max(sup_bound_polydisc(T, q.center, q.radii), 1e-300) for q in pieces]
            tols = ([st.tolerance / (4 * norms[0])]
                    + [st.tolerance / (4 * A * nq) for nq in norms[1:1 + len(others)]]
                    + [mu / (A * nq) for nq in norms[1 + len(others):]])
            tols = [min(t, 1e300) for t in tols]
            values = [1.0] + [0.0] * (len(pieces) - 1)
            res = blend([_disc_of(q, 0) for q in pieces], values, tols, max_degree, step=8)
            if not res.success:
                raise RungeInfeasible(
                    f"stage {st.index}: blend for function {fn} not certified up to degree "
                    f"{max_degree} (best ratio {res.ratio:.3g} at degree {res.degree})",
                    best=res, stage=st.index,
                )
            blends.append(res)
            poly = poly + _embed_axis(res.phi, dim, 0) * T
            for b, q, nq in zip(res.bounds, pieces, norms):
                key = _piece_key(q)
                contributions[key] = contributions.get(key, 0.0) + b.bound * nq
        own = {s.name or _piece_key(s.piece): contributions.get(_piece_key(s.piece), 0.0) for s, _ in active}
        small = {_piece_key(q): contributions.get(_piece_key(q), 0.0) for q in zero_pieces}
        terms.append(TermRecord(fn, st.index, poly, blends, own, small))
    return terms


def series_conditions(shift: Fraction, stages: Sequence[StagePlan], functions: Sequence[SparsePoly],
                      terms: Sequence[TermRecord], measure: bool = True) -> list[Condition]:
    """Certified and measured error of every slot for every function.

    On a far disc of stage ``j`` the error splits into the stage-``j`` term
    (own fit plus crosstalk), earlier terms (each small on later far discs)
    and later terms (each small on its own stage compact, which contains the
    disc).
    """
    dim = functions[0].nvars
    compacts = {st.index: st.compact for st in stages}
    out = []
    for st in stages:
        for slot in st.slots:
            key = _piece_key(slot.piece)
            for fn, F in enumerate(functions):
                target = slot.target if slot.fn == fn else SparsePoly.zero(dim)
                own = earlier = tail = 0.0
                for t in terms:
                    if t.fn != fn:
                        continue
                    if t.stage == st.index:
                        own += t.own.get(slot.name or key, 0.0) + t.small.get(key, 0.0)
                    elif t.stage < st.index:
                        earlier += t.small.get(key, 0.0)
                    else:
                        tail += t.small.get(_piece_key(compacts[t.stage]), 0.0)
                measured = measure_condition(F, target, slot.m, shift, st.compact) if measure else float("nan")
                out.append(Condition(st.index, fn, slot.name, slot.m, target, own, earlier, tail,
                                     measured, st.tolerance))
    return out


def build_series(shift: Fraction, stages: Sequence[StagePlan], seeds: Sequence[SparsePoly],
                 max_degree: int = 400, measure: bool = True) -> SeriesResult:
    """Build ``F = seed_F + sum_j F_j`` for every function index ``F``.

    Smallness away from the own discs uses ``mu_j = min_tol * 2**-j / 8``,
    which keeps every stage condition below its tolerance.
    """
    seeds = [s.to_exact() for s in seeds]
    min_tol = min(st.tolerance for st in stages) if stages else 1.0
    terms: list[TermRecord] = []
    for st in stages:
        later = [s for other in stages if other.index > st.index for s in other.slots]
        mu = min_tol * 2.0 ** (-st.index) / 8
        terms.extend(build_stage_terms(shift, st, later, seeds, mu, max_degree))
    functions = []
    for fn, seed in enumerate(seeds):
        acc = seed
        for t in terms:
            if t.fn == fn:
                acc = acc + t.poly
        functions.append(acc)
    conditions = series_conditions(shift, stages, functions, terms, measure)
    return SeriesResult(functions, list(seeds), list(stages), terms, conditions)


def grid_sup(p: SparsePoly, K: Region, grid: GridSpec = GridSpec()) -> float:
    """``max |p|`` over the grid of ``K``.

    For a polydisc the polynomial is first re-expanded exactly around the
    centre, which keeps the floating evaluation free of the cancellation a
    far-away expansion point would cause.
    """
    if p.is_zero():
        return 0.0
    pts = K.sample(grid)
    if isinstance(K, Polydisc) and any(K.center):
        p = poly_translate(p.to_exact(), [QQi.from_complex(c) for c in K.center])
        pts = pts - np.asarray(K.center)[None, :]
    with np.errstate(all="ignore"):
        vals = np.abs(poly_eval_points(p, pts))
    return float(np.max(np.where(np.isnan(vals), np.inf, vals)))


def measure_condition(F: SparsePoly, target: SparsePoly, m: int, shift: Fraction, K: Polydisc,
                      grid: GridSpec = GridSpec(17)) -> float:
    """Direct evaluation of ``sup_K |F(z + m*shift) - target(z)|``.

    One variable: exact recentring and certified boundary sampling.  More
    variables: grid evaluation of the exactly translated difference.
    """
    dim = F.nvars
    moved = poly_translate(F, [QQi(Fraction(shift) * m)] * dim)
    diff = moved - target
    if diff.is_zero():
        return 0.0
    if dim == 1:
        return certify_sparse(diff, _disc_of(K, 0), min_samples=512, goal=1e-6).bound
    return grid_sup(diff, K, grid)


# ---------------------------------------------------------------------------
# Birkhoff pair


@dataclass
class BirkhoffStage:
    index: int
    compact: Polydisc
    m_odd: int
    m_even: int
    escape: int
    tolerance: float
    targets: tuple
    conditions: list
    contained: bool

    def to_json(self) -> dict:
        return {
            "stage": self.index,
            "compact": self.compact.to_json(),
            "radius": self.compact.radii[0],
            "escape_index": self.escape,
            "m_odd": self.m_odd,
            "m_even": self.m_even,
            "tolerance": self.tolerance,
            "targets": [poly_to_json(t) for t in self.targets],
            "conditions": [c.to_json() for c in self.conditions],
            "containment": self.contained,
        }


@dataclass
class BirkhoffSchedule:
    shift: Fraction
    stages: list
    envelope: Polydisc
    series: SeriesResult = field(repr=False)

    @property
    def conditions(self) -> list:
        return [c for st in self.stages for c in st.conditions]

    def all_hold(self) -> bool:
        return all(c.holds for c in self.conditions) and all(st.contained for st in self.stages)

    def partial_sums(self, j: int) -> tuple[SparsePoly, SparsePoly]:
        return self.series.partial_sum(0, j), self.series.partial_sum(1, j)

    def to_json(self) -> dict:
        return {
            "shift": float(self.shift),
            "stages": [st.to_json() for st in self.stages],
            "envelope": self.envelope.to_json(),
            "terms": [t.to_json() for t in self.series.terms],
            "all_conditions_hold": self.all_hold(),
        }


def _resolve(target: Target, m: int, dim: int) -> SparsePoly:
    if target is None:
        return SparsePoly.zero(dim)
    if callable(target) and not isinstance(target, SparsePoly):
        target = target(m)
    if target.nvars != dim:
        raise ValueError(f"target in {target.nvars} variables, expected {dim}")
    return target.to_exact()


def birkhoff_pair(tau: DiagonalTranslation | float, targets: Sequence[tuple], J: int | None = None, *,
                  base: Polydisc | None = None, tolerances: Sequence[float] | None = None,
                  gap_ratio: float = 4.0, seeds: tuple = (None, None), max_degree: int = 400,
                  margin: float = 0.5, direction: int = 1, dim: int | None = None):
    """Finite Birkhoff pair ``(f, g, schedule)`` for the diagonal translation.

    Stage ``j`` uses the compact ``K_j`` and two escape powers
    ``m_odd < m_even``; ``f o tau^m_odd ~ targets[j][0]`` and
    ``g o tau^m_even ~ targets[j][1]`` on ``K_j`` while ``g o tau^m_odd`` and
    ``f o tau^m_even`` stay near 0.  ``K_(j+1)`` is a polydisc containing
    ``K_j`` and both translates in its interior.  Targets may be callables
    of the escape power (for drift corrections).  ``direction=-1`` translates
    the other way.
    """
    if isinstance(tau, DiagonalTranslation):
        b = tau.b_exact
        dim = dim or tau.n
    else:
        b = Fraction(tau)
        if not b > 0:
            raise ValueError("b must be positive")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    J = len(targets) if J is None else J
    if J < 1:
        raise ValueError("at least one stage is needed")
    if len(targets) < J:
        raise ValueError("fewer target pairs than stages")
    if dim is None:
        dim = base.dim if base is not None else next(
            (t.nvars for pair in targets for t in pair if isinstance(t, SparsePoly)), 1)
    base = base if base is not None else Polydisc.unit(dim)
    tolerances = list(tolerances) if tolerances is not None else [2.0 ** -(j + 1) for j in range(J)]
    if len(tolerances) < J or any(not t > 0 for t in tolerances):
        raise ValueError("one positive tolerance per stage is needed")
    seeds = [s.to_exact() if s is not None else SparsePoly.zero(dim) for s in seeds]
    shift = b * direction
    tau_abs = DiagonalTranslation(dim, b)

    plans = []
    meta = []
    K = base
    for j in range(1, J + 1):
        esc = escape_index(tau_abs, K)
        r = K.radii[0]
        step = max(esc, math.ceil((2 + gap_ratio) * r / float(b)))
        m_odd, m_even = step, 2 * step
        h_odd = _resolve(targets[j - 1][0], m_odd, dim)
        h_even = _resolve(targets[j - 1][1], m_even, dim)
        odd_piece = K.translate([complex(float(shift * m_odd))] * dim)
        even_piece = K.translate([complex(float(shift * m_even))] * dim)
        slots = [Slot(0, m_odd, h_odd, odd_piece, f"{j}:odd"), Slot(1, m_even, h_even, even_piece, f"{j}:even")]
        plans.append(StagePlan(j, K, tolerances[j - 1], slots))
        nxt = polydisc_hull([K, odd_piece, even_piece], margin)
        meta.append((esc, m_odd, m_even, (h_odd, h_even), nxt.contains_region(K) and
                     nxt.contains_region(odd_piece) and nxt.contains_region(even_piece)))
        K = nxt
    series = build_series(shift, plans, seeds, max_degree)
    stages = []
    for plan, (esc, m_odd, m_even, tg, contained) in zip(plans, meta):
        conds = [c for c in series.conditions if c.stage == plan.index]
        stages.append(BirkhoffStage(plan.index, plan.compact, m_odd, m_even, esc, plan.tolerance,
                                    tg, conds, contained))
    f, g = series.functions
    return f, g, BirkhoffSchedule(shift, stages, K, series)


# ---------------------------------------------------------------------------
# Orbit errors


@dataclass(frozen=True)
class OrbitCurve:
    ms: tuple
    errors: tuple

    @property
    def argmin(self) -> int:
        return self.ms[int(np.argmin(self.errors))]

    def to_csv(self) -> str:
        lines = ["m,sup_error"] + [f"{m},{e!r}" for m, e in zip(self.ms, self.errors)]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"m": list(self.ms), "sup_error": list(self.errors), "argmin": self.argmin}


def hypercyclic_orbit_error(f: SparsePoly, tau: DiagonalTranslation | float, target: SparsePoly,
                            K: Region, m_range: Sequence[int], grid: GridSpec = GridSpec()) -> OrbitCurve:
    """``sup`` over the grid of ``K`` of ``|f(z + m b 1) - target(z)|`` for each ``m``.

    Translates are computed exactly before evaluation, so large ``m`` do not
    suffer from cancellation in the floating evaluation.
    """
    b = tau.b_exact if isinstance(tau, DiagonalTranslation) else Fraction(tau)
    f = f.to_exact()
    target = target.to_exact()
    errs = []
    for m in m_range:
        moved = poly_translate(f, [QQi(b * m)] * f.nvars) if m else f
        errs.append(grid_sup(moved - target, K, grid))
    return OrbitCurve(tuple(int(m) for m in m_range), tuple(errs))
