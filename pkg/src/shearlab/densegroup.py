"""Finite-stage experiments for the two-generator shear group.

Conjugating ``F = F_(0,g)`` by powers of the diagonal translation gives

    tau^-m o F_(0,g) o tau^m = F_(0, g(. + m b) + c),   c = -2 (-1)^n m b,

so approximating a shear ``F_(0,h)`` on a compact amounts to making the
translates of ``g`` approximate the drift-corrected targets
``h + 2 (-1)^n m b``; the staged Birkhoff builder does exactly that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .polycore import QQi, SparsePoly, parse_poly, poly_to_json, poly_translate
from .regions import GridSpec, Polydisc, Region, RegionError, bounding_polydisc, polydisc_hull
from .runge import (
    RungeInfeasible,
    Slot,
    StagePlan,
    birkhoff_pair,
    build_series,
    certify_sparse,
    grid_sup,
    _disc_of,
)
from .shearcalc import (
    AutWord,
    NotRepresentableError,
    SemiSymbolicMap,
    as_map,
    enumerate_reduced_words,
    make_cyclic_I,
    make_F,
    margin_report,
    reduced_word_count,
)
from .translations import DiagonalTranslation, escape_index


class ScheduleInfeasible(RuntimeError):
    """A stage could not be built or a schedule invariant failed."""

    def __init__(self, message: str, stage: int | None = None, word: str | None = None):
        super().__init__(message)
        self.stage = stage
        self.word = word


class TargetUnreachable(RuntimeError):
    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


# ---------------------------------------------------------------------------
# Targets


def _kappa(n: int) -> int:
    return 1 - (-1) ** n


@dataclass(frozen=True)
class ShearTarget:
    """``F_(0,h)(z) = (z_2, ..., z_n, -(-1)^n z_1 + h(z_2..z_n) + (1 - (-1)^n) z_n)``."""

    n: int
    h: SparsePoly
    name: str = ""

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("shear targets need n >= 2")
        if self.h.nvars != self.n - 1:
            raise ValueError(f"h must be a polynomial in the {self.n - 1} variables z2..z{self.n}")
        object.__setattr__(self, "h", self.h.to_exact())

    @classmethod
    def cyclic(cls, n: int) -> "ShearTarget":
        """The cyclic map ``I`` written as ``F_(0,h)``."""
        h = SparsePoly.var(n - 2, n - 1) * -_kappa(n)
        return cls(n, h, "I")

    @property
    def map(self) -> SemiSymbolicMap:
        return shear_map(self.n, self.h)

    def label(self) -> str:
        return self.name or f"F(0, {self.h})"

    def to_json(self) -> dict:
        return {"name": self.label(), "h": poly_to_json(self.h)}


def shear_map(n: int, h: SparsePoly) -> SemiSymbolicMap:
    return make_F(n, SparsePoly.zero(n - 1), h).map


def parse_target(spec, n: int) -> tuple:
    """Target word from ``"id"``, ``"I"``, ``"F(<poly in z2..zn>)"`` or a list of those.

    A list ``[A, B]`` means the composition ``A o B``.
    """
    if isinstance(spec, ShearTarget):
        return (spec,)
    if isinstance(spec, (list, tuple)):
        out = ()
        for part in spec:
            out += parse_target(part, n)
        return out
    if not isinstance(spec, str):
        raise NotRepresentableError(f"cannot read target {spec!r}")
    text = spec.strip()
    if text == "id":
        return ()
    if text == "I":
        return (ShearTarget.cyclic(n),)
    if text.startswith("F(") and text.endswith(")"):
        body = text[2:-1]
        if "," in body:
            f_txt, body = body.split(",", 1)
            if f_txt.strip() != "0":
                raise NotRepresentableError("only shears F(0, h) are representable targets")
        h = parse_poly(body, n - 1, [f"z{k}" for k in range(2, n + 1)])
        return (ShearTarget(n, h, f"F(0, {body.strip()})"),)
    raise NotRepresentableError(f"target {spec!r} is outside the representable class")


def word_label(word: Sequence[ShearTarget]) -> str:
    return " o ".join(t.label() for t in word) if word else "id"


def _word_map(word: Sequence[ShearTarget], n: int) -> SemiSymbolicMap:
    out = SemiSymbolicMap.identity(n)
    for t in reversed(word):
        out = t.map.compose(out)
    return out


# ---------------------------------------------------------------------------
# Conjugation


def drift_constant(n: int, b, m: int) -> Fraction:
    return Fraction(-2 * (-1) ** n * m) * Fraction(b)


def _translation_map(n: int, s: Fraction) -> SemiSymbolicMap:
    return SemiSymbolicMap.translation([QQi(s)] * n)


def conjugate_by_power(F, tau: DiagonalTranslation, m: int) -> SemiSymbolicMap:
    """``tau^-m o F o tau^m`` by exact composition (``m`` may be negative)."""
    M = as_map(F)
    if m == 0:
        return M
    s = tau.b_exact * m
    return _translation_map(M.n, -s).compose(M.compose(_translation_map(M.n, s)))


def conjugation_power(F, tau: DiagonalTranslation, m: int) -> SemiSymbolicMap:
    """``C~^m(F) = tau^m o F o tau^-m``."""
    return conjugate_by_power(F, tau, -m)


def conjugate_formula(n: int, g: SparsePoly, tau: DiagonalTranslation, m: int) -> SemiSymbolicMap:
    """Closed form of ``tau^-m o F_(0,g) o tau^m``: ``F_(0, g(. + m b) + c)``."""
    return shear_map(n, translated_shear(g, tau, m))


def translated_shear(g: SparsePoly, tau: DiagonalTranslation, m: int) -> SparsePoly:
    b = tau.b_exact
    moved = poly_translate(g.to_exact(), [QQi(b * m)] * g.nvars) if m else g.to_exact()
    return moved + drift_constant(g.nvars + 1, b, m)


# ---------------------------------------------------------------------------
# Distances


@dataclass(frozen=True)
class MapDistance:
    """Sup over the grid of ``compact`` of the Euclidean distance between two maps."""

    compact: Region
    grid: GridSpec
    value: float

    def to_json(self) -> dict:
        return {"compact": self.compact.to_json(), "grid": self.grid.to_json(), "value": self.value}


def _images(F, pts: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        if isinstance(F, AutWord):
            return F.apply(pts)
        if isinstance(F, (list, tuple)):
            for M in reversed(F):
                pts = as_map(M).evaluate(pts)
            return pts
        return as_map(F).evaluate(pts)


def map_distance(F, G, K: Region, grid: GridSpec = GridSpec()) -> MapDistance:
    """``sup_grid |F(x) - G(x)|``; a list of maps stands for their composition."""
    pts = K.sample(grid)
    diff = _images(F, pts) - _images(G, pts)
    dev = np.sqrt(np.sum(np.abs(diff) ** 2, axis=1))
    value = float(np.max(np.where(np.isnan(dev), np.inf, dev))) if dev.size else 0.0
    return MapDistance(K, grid, value)


def shear_distance(g: SparsePoly, tau: DiagonalTranslation, m: int, h: SparsePoly, K: Region,
                   grid: GridSpec = GridSpec()) -> MapDistance:
    """Distance between ``tau^-m o F_(0,g) o tau^m`` and ``F_(0,h)`` on ``K``.

    Only the last components differ, by ``g(z' + m b) + c - h(z')`` with
    ``z' = (z_2, ..., z_n)``; that difference is formed exactly before the
    grid evaluation, so large translates lose no precision.
    """
    diff = translated_shear(g, tau, m) - h.to_exact()
    return MapDistance(K, grid, grid_sup(diff, _project_tail(K), grid))


def jacobian_norm(M: SemiSymbolicMap, K: Region, grid: GridSpec = GridSpec()) -> float:
    """Largest spectral norm of the Jacobian matrix over the grid of ``K``."""
    pts = K.sample(grid)
    J = M.jacobian_matrix()
    with np.errstate(all="ignore"):
        vals = np.stack([np.stack([e.evaluate(pts) for e in row], axis=1) for row in J], axis=1)
    norms = np.linalg.svd(vals, compute_uv=False)[:, 0]
    return float(np.max(norms))


def _project_tail(K: Polydisc) -> Polydisc:
    return K.project(range(1, K.dim))


def _enlarge(K: Polydisc, margin: float) -> Polydisc:
    return Polydisc(K.center, tuple(r + margin for r in K.radii))


# ---------------------------------------------------------------------------
# Approximating targets


@dataclass
class TargetApproximation:
    word: tuple
    powers: tuple
    errors: tuple
    compacts: tuple
    lipschitz: tuple
    bound: float
    measured: float
    tolerance: float

    @property
    def achieved(self) -> bool:
        return self.bound <= self.tolerance

    def generator_word(self) -> list:
        """Letters over ``{tau, F}`` realising the approximant (rightmost acts first)."""
        letters = []
        for m in self.powers:
            letters += [("tau", -m), ("F", 1), ("tau", m)] if m else [("F", 1)]
        return [(a, e) for a, e in letters]

    def to_json(self) -> dict:
        return {
            "target": word_label(self.word),
            "powers": list(self.powers),
            "atomic_errors": list(self.errors),
            "compacts": [K.to_json() for K in self.compacts],
            "lipschitz": list(self.lipschitz),
            "error_bound": self.bound,
            "measured_error": self.measured,
            "tolerance": self.tolerance,
            "achieved": self.achieved,
            "generator_word": [[a, e] for a, e in self.generator_word()],
        }


def composite_compacts(word: Sequence[ShearTarget], K: Polydisc, margin: float = 0.25,
                       grid: GridSpec = GridSpec()) -> list[Polydisc]:
    """Compacts on which each factor must be approximated, rightmost factor first.

    The factor applied after ``T`` works on the bounding polydisc of ``T``
    applied to the grid of the previous compact, enlarged by ``margin``.
    """
    out = [K]
    for t in reversed(word[1:]):
        img = t.map.evaluate(out[-1].sample(grid))
        out.append(bounding_polydisc(img, margin))
    return out


def approximate_target(target, tau: DiagonalTranslation, g: SparsePoly, K: Polydisc, eps: float,
                       candidates: Sequence[int] | None = None, grid: GridSpec = GridSpec(),
                       margin: float = 0.25) -> TargetApproximation:
    """Power(s) ``m`` with ``tau^-m o F_(0,g) o tau^m`` within ``eps`` of the target on ``K``.

    Composite targets ``T_1 o ... o T_k`` are approximated factor by factor
    on enlarged compacts and the error is propagated as
    ``B_i = e_i + Lip(T_i) * B_(i+1)``, with Lipschitz constants measured as
    Jacobian norms on the grid of the hull of the compact and its enlargement.
    """
    n = tau.n
    word = parse_target(target, n) if not (isinstance(target, tuple) and all(
        isinstance(t, ShearTarget) for t in target)) else target
    if g.nvars != n - 1:
        raise ValueError(f"g must be a polynomial in {n - 1} variables")
    if not word:
        return TargetApproximation((), (), (), (K,), (), 0.0, 0.0, eps)
    cands = list(candidates) if candidates is not None else list(range(0, 64))
    if not cands:
        raise ValueError("no candidate powers")
    compacts = composite_compacts(word, K, margin, grid)
    powers, errors, lips = [], [], []
    bound = 0.0
    for t, L in zip(reversed(word), compacts):
        dists = [(shear_distance(g, tau, m, t.h, L, grid).value, i) for i, m in enumerate(cands)]
        err, i = min(dists)
        m = cands[i]
        lip = jacobian_norm(t.map, _enlarge(L, margin), grid) if powers else 1.0
        bound = err + lip * bound
        powers.append(m)
        errors.append(err)
        lips.append(lip)
    powers.reverse()
    errors.reverse()
    lips.reverse()
    approximants = [shear_map(n, translated_shear(g, tau, m)) for m in powers]
    measured = map_distance(approximants, [t.map for t in word], K, grid).value
    result = TargetApproximation(tuple(word), tuple(powers), tuple(errors), tuple(compacts),
                                 tuple(lips), bound, measured, eps)
    if not result.achieved:
        raise TargetUnreachable(
            f"{word_label(word)}: best error {bound:.3g} exceeds {eps:g} over the candidate powers",
            best=result,
        )
    return result


# ---------------------------------------------------------------------------
# Freeness


@dataclass
class FreenessReport:
    length: int
    threshold: float
    words: list
    margins: list
    closed_form_count: int

    @property
    def min_margin(self) -> float:
        return min(self.margins, default=math.inf)

    @property
    def passed(self) -> bool:
        return all(m > self.threshold for m in self.margins) and len(self.words) == self.closed_form_count

    def to_json(self) -> dict:
        return {
            "max_length": self.length,
            "threshold": self.threshold,
            "word_count": len(self.words),
            "closed_form_count": self.closed_form_count,
            "min_margin": self.min_margin,
            "passed": self.passed,
            "margins": [{"word": w, "margin": m} for w, m in zip(self.words, self.margins)],
        }


def freeness_report(tau: DiagonalTranslation, F, K: Region, length: int = 4, threshold: float = 1e-3,
                    grid: GridSpec = GridSpec()) -> FreenessReport:
    """Verified ``word_margin`` of every nonempty reduced word in ``{tau, F}`` up to ``length``."""
    alphabet = (("tau", tau), ("F", F))
    words = enumerate_reduced_words(alphabet, length)
    margins = [margin_report(w, K, grid).value for w in words]
    return FreenessReport(length, threshold, [str(w) for w in words], margins,
                          reduced_word_count(2, length))


# ---------------------------------------------------------------------------
# Two-generator experiment


def default_seed(nvars: int) -> SparsePoly:
    """A fixed generic polynomial; it keeps ``F`` away from the relations of small words."""
    z = SparsePoly.variables(nvars)
    out = SparsePoly.constant(Fraction(1, 2), nvars)
    for k, v in enumerate(z):
        out = out + v * Fraction(1, 3 + k) + v * v * Fraction(1, 5 + k)
    return out


@dataclass
class DriftCheck:
    m: int
    constant: Fraction
    exact_match: bool

    def to_json(self) -> dict:
        return {"m": self.m, "constant": f"{self.constant.numerator}/{self.constant.denominator}",
                "constant_float": float(self.constant), "exact_match": self.exact_match}


def drift_check(F, g: SparsePoly, tau: DiagonalTranslation, m: int) -> DriftCheck:
    """Composition path against the closed form, compared exactly."""
    n = tau.n
    lhs = conjugate_by_power(F, tau, m)
    rhs = conjugate_formula(n, g, tau, m)
    return DriftCheck(m, drift_constant(n, tau.b_exact, m), lhs == rhs)


@dataclass
class DenseReport:
    n: int
    tau: DiagonalTranslation
    g: SparsePoly
    F: object
    schedule: object
    results: list
    failures: list
    drift: list
    freeness: FreenessReport
    eps: float

    @property
    def success(self) -> bool:
        return (not self.failures and all(r.achieved for r in self.results)
                and all(d.exact_match for d in self.drift) and self.freeness.passed)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "tau": self.tau.to_json(),
            "tolerance": self.eps,
            "g_degree": self.g.degree,
            "schedule": self.schedule.to_json() if self.schedule is not None else None,
            "targets": [r.to_json() for r in self.results],
            "failures": self.failures,
            "drift": [d.to_json() for d in self.drift],
            "freeness": self.freeness.to_json(),
            "success": self.success,
        }


def _drift_target(h: SparsePoly, n: int, b: Fraction, direction: int):
    sign = 2 * (-1) ** n * direction

    def target(m: int) -> SparsePoly:
        return h + Fraction(sign * m) * b

    return target


def _pair_up(items: list) -> list[tuple]:
    padded = items + [None] * (len(items) % 2)
    return [(padded[i], padded[i + 1]) for i in range(0, len(padded), 2)]


def _build_shear_generator(tau: DiagonalTranslation, atoms: list, base: Polydisc, eps: float,
                           seed: SparsePoly, max_degree: int, gap_ratio: float, direction: int = 1):
    """One ``g`` whose signed translates approximate every drift-corrected atom.

    Atoms are paired into stages; ``f`` (seeded) carries the odd slot and
    ``g`` the even slot, and ``s = f + g`` is returned, so each stage
    condition is split evenly between the two functions.
    """
    n = tau.n
    b = tau.b_exact
    pairs = _pair_up([_drift_target(a.h, n, b, direction) for a in atoms])
    J = len(pairs)
    tolerances = [eps * 2.0 ** (1 - j) / 2 for j in range(1, J + 1)]
    try:
        f, g, schedule = birkhoff_pair(b, pairs, J, base=base, tolerances=tolerances,
                                       gap_ratio=gap_ratio, seeds=(seed, None), max_degree=max_degree,
                                       direction=direction, dim=n - 1)
    except RungeInfeasible as exc:
        raise ScheduleInfeasible(str(exc), stage=exc.stage) from exc
    slots = []
    for st in schedule.stages:
        slots += [st.m_odd, st.m_even]
    return f + g, schedule, slots


def two_generator_experiment(tau: DiagonalTranslation, targets: Sequence, K: Polydisc, eps: float, *,
                             seed: SparsePoly | None = None, max_degree: int = 400,
                             gap_ratio: float = 8.0, word_length: int = 4,
                             margin_threshold: float = 1e-3, grid: GridSpec = GridSpec(),
                             margin: float = 0.25) -> DenseReport:
    """Build one ``g``, set ``F = F_(0,g)`` and approximate every target by words in ``tau, F``."""
    n = tau.n
    if n < 2:
        raise ValueError("the shear experiment needs n >= 2")
    if K.dim != n:
        raise RegionError("compact and translation live in different dimensions")
    words = [parse_target(t, n) for t in targets]
    atoms: list[ShearTarget] = []
    regions: list[Polydisc] = [_project_tail(K)]
    atom_index: dict = {}
    for w in words:
        for t, L in zip(reversed(w), composite_compacts(w, K, margin, grid)):
            if t.h not in atom_index:
                atom_index[t.h] = len(atoms)
                atoms.append(t)
            regions.append(_project_tail(_enlarge(L, margin)))
    seed = (seed if seed is not None else default_seed(n - 1)).to_exact()
    base = polydisc_hull(regions)
    schedule = None
    if atoms:
        s, schedule, powers = _build_shear_generator(tau, atoms, base, eps, seed, max_degree, gap_ratio)
    else:
        s, powers = seed, []
    F = make_F(n, SparsePoly.zero(n - 1), s, "F")
    results, failures, used = [], [], []
    for w in words:
        cands = [powers[atom_index[t.h]] for t in w]
        try:
            r = approximate_target(w, tau, s, K, eps, candidates=sorted(set(cands)) or [0], grid=grid,
                                   margin=margin)
        except TargetUnreachable as exc:
            r = exc.best
            failures.append({"target": word_label(w), "error_bound": r.bound, "tolerance": eps})
        results.append(r)
        used += [m for m in r.powers if m not in used]
    drift = [drift_check(F, s, tau, m) for m in used]
    freeness = freeness_report(tau, F, K, word_length, margin_threshold, grid)
    return DenseReport(n, tau, s, F, schedule, results, failures, drift, freeness, eps)


# ---------------------------------------------------------------------------
# Conjugation orbits


@dataclass
class OrbitVisit:
    target: str
    m: int
    error: float
    tolerance: float
    compact: Polydisc

    @property
    def achieved(self) -> bool:
        return self.error <= self.tolerance

    def to_json(self) -> dict:
        return {"target": self.target, "m": self.m, "error": self.error, "tolerance": self.tolerance,
                "compact": self.compact.to_json(), "achieved": self.achieved}


@dataclass
class OrbitReport:
    visits: list
    identities: dict
    g: SparsePoly | None
    schedule: object = field(default=None, repr=False)

    @property
    def success(self) -> bool:
        return all(v.achieved for v in self.visits) and all(self.identities.values())

    def to_json(self) -> dict:
        return {
            "visits": [v.to_json() for v in self.visits],
            "group_action_identities": dict(self.identities),
            "g_degree": self.g.degree if self.g is not None else None,
            "schedule": self.schedule.to_json() if self.schedule is not None else None,
            "success": self.success,
        }


def _small_shear_pair(n: int) -> tuple[SemiSymbolicMap, SemiSymbolicMap]:
    z = SparsePoly.variables(n - 1)
    return shear_map(n, z[0] * z[-1] + Fraction(1, 3)), shear_map(n, z[-1] * Fraction(-2, 7) + 1)


def action_identities(F: SemiSymbolicMap, tau: DiagonalTranslation, powers: Sequence[int]) -> dict:
    """Exact checks that ``m -> C~^m`` is a group action by automorphisms.

    The composition check ``C~(A o B) = C~(A) o C~(B)`` uses ``B = I`` with
    the given ``F`` (composing ``F`` with itself would exceed the degree
    cap) and a pair of small shears.
    """
    n = F.n
    m1, m2 = (list(powers) + [1, 2])[:2]
    C = conjugation_power
    out = {
        "power_law": C(F, tau, m1 + m2) == C(C(F, tau, m2), tau, m1),
        "inverse": C(C(F, tau, m1), tau, -m1) == F,
    }
    Imap = make_cyclic_I(n).map
    out["composition_with_I"] = C(F.compose(Imap), tau, 1) == C(F, tau, 1).compose(C(Imap, tau, 1))
    A, B = _small_shear_pair(n)
    out["composition_small_shears"] = C(A.compose(B), tau, m1) == C(A, tau, m1).compose(C(B, tau, m1))
    return out


def conjugation_orbit(F, tau: DiagonalTranslation, targets: Sequence, compacts: Sequence[Polydisc],
                      eps_list: Sequence[float], *, m_range: Sequence[int] | None = None,
                      seed: SparsePoly | None = None, max_degree: int = 400, gap_ratio: float = 8.0,
                      grid: GridSpec = GridSpec()) -> OrbitReport:
    """Powers ``m_j`` with ``C~^(m_j)(F)`` within ``eps_j`` of ``targets[j]`` on ``compacts[j]``.

    With ``F=None`` a shear ``F_(0,g)`` is built for the purpose: since
    ``C~^m`` conjugates by ``tau^-m``, the Birkhoff stages run in the
    negative direction.
    """
    n = tau.n
    if not (len(targets) == len(compacts) == len(eps_list)):
        raise ValueError("one compact and one tolerance per target expected")
    words = [parse_target(t, n) for t in targets]
    g = None
    schedule = None
    visits = []
    if F is None:
        atoms = []
        for w in words:
            if len(w) != 1:
                raise NotRepresentableError("orbit targets must be single shears")
            atoms.append(w[0])
        seed = (seed if seed is not None else default_seed(n - 1)).to_exact()
        base = polydisc_hull([_project_tail(L) for L in compacts] or [_project_tail(Polydisc.unit(n))])
        eps = min(eps_list) if eps_list else 1.0
        g, schedule, powers = _build_shear_generator(tau, atoms, base, eps, seed, max_degree,
                                                     gap_ratio, direction=-1)
        F_map = shear_map(n, g)
        for j, (w, L, e) in enumerate(zip(words, compacts, eps_list)):
            m = powers[j]
            err = shear_distance(g, tau, -m, w[0].h, L, grid).value
            visits.append(OrbitVisit(word_label(w), m, err, e, L))
    else:
        F_map = as_map(F)
        cands = list(m_range) if m_range is not None else list(range(0, 33))
        for w, L, e in zip(words, compacts, eps_list):
            T = _word_map(w, n)
            best = min((map_distance(conjugation_power(F_map, tau, m), T, L, grid).value, m) for m in cands)
            visits.append(OrbitVisit(word_label(w), best[1], best[0], e, L))
    identities = action_identities(F_map, tau, [v.m for v in visits])
    return OrbitReport(visits, identities, g, schedule)


# ---------------------------------------------------------------------------
# Staged schedule


@dataclass
class ScheduleStage:
    index: int
    target: str
    tolerance: float
    k: int
    compact: Polydisc
    escape: int
    m: int
    margin: float | None
    margin_word: str | None
    lipschitz: float | None
    C: float | None
    a_errors: dict
    b_error: float | None
    notes: list

    def to_json(self) -> dict:
        return {
            "stage": self.index,
            "target": self.target,
            "tolerance": self.tolerance,
            "k": self.k,
            "compact": self.compact.to_json(),
            "escape_index": self.escape,
            "m": self.m,
            "delta": self.margin,
            "delta_word": self.margin_word,
            "lipschitz": self.lipschitz,
            "C": self.C,
            "a_errors": {str(i): v for i, v in self.a_errors.items()},
            "b_error": self.b_error,
            "notes": list(self.notes),
        }


@dataclass
class StageSchedule:
    tau: DiagonalTranslation
    compacts: list
    stages: list
    g: SparsePoly | None
    invariants: dict

    def to_json(self) -> dict:
        return {
            "tau": self.tau.to_json(),
            "exhaustion": [L.to_json() for L in self.compacts],
            "stages": [s.to_json() for s in self.stages],
            "invariants": dict(self.invariants),
        }


def _sup_on(p: SparsePoly, K: Polydisc, grid: GridSpec) -> float:
    if p.nvars == 1 and not p.is_zero():
        return certify_sparse(p, _disc_of(K, 0), min_samples=256).bound
    return grid_sup(p, K, grid)


def _check_schedule(stages: list[ScheduleStage], tau: DiagonalTranslation) -> dict:
    tols = [s.tolerance for s in stages]
    ks = [s.k for s in stages]
    contain = True
    for j, sj in enumerate(stages):
        for si in stages[:j]:
            moved = si.compact.translate(complex(float(tau.b_exact * si.m)))
            contain &= sj.compact.contains_region(moved, strict=True)
    guard = True
    for j, sj in enumerate(stages):
        if sj.margin is None:
            continue
        tail = sum(sk.C * sk.tolerance for sk in stages[j + 1:] if sk.C is not None)
        guard &= sj.margin > tail
    return {
        "tolerances_strictly_decreasing": all(a > b for a, b in zip(tols, tols[1:])),
        "tolerances_summable": math.isfinite(sum(tols)),
        "k_strictly_increasing": all(a < b for a, b in zip(ks, ks[1:])),
        "containment": bool(contain),
        "freeness_guard": bool(guard),
    }


def schedule_build(targets: Sequence, base_compacts: Sequence[Polydisc], tau: DiagonalTranslation, *,
                   eps: float = 1e-2, seed: SparsePoly | None = None, max_degree: int = 400,
                   gap_ratio: float = 4.0, grid: GridSpec = GridSpec(),
                   margin: float = 0.5) -> StageSchedule:
    """Stage bookkeeping for a sequence of shear targets.

    ``F_j = F_(0, s_j)`` with ``s_j = seed + t_1 + ... + t_j``; the term
    ``t_j`` makes ``tau^-m_j o F_j o tau^m_j`` close to the ``j``-th target
    on ``L_(k(j))`` and is small on ``L_(k(j))`` itself and on every later
    translate.  A leading ``"id"`` target gives ``F_1 = id``.  The
    exhaustion is extended by hulls when the given compacts do not satisfy
    the containment condition.  Every invariant is checked before the
    schedule is returned.
    """
    n = tau.n
    words = [parse_target(t, n) for t in targets]
    if not words:
        raise ValueError("at least one target is needed")
    for j, w in enumerate(words):
        if len(w) > 1:
            raise NotRepresentableError("schedule targets must be single shears or id")
        if not w and j > 0:
            raise NotRepresentableError("the identity target is only admitted at the first stage")
    exhaustion = [L for L in base_compacts]
    if not exhaustion or any(L.dim != n for L in exhaustion):
        raise RegionError(f"base compacts must be polydiscs in dimension {n}")
    for a, b in zip(exhaustion, exhaustion[1:]):
        if not b.contains_region(a, strict=False):
            raise RegionError("base compacts must be nested")
    b = tau.b_exact
    eps_list = [eps * 2.0 ** (1 - j) for j in range(1, len(words) + 1)]
    ks, ms, escs, notes = [], [], [], []
    moved: list[Polydisc] = []
    for j in range(len(words)):
        need = [exhaustion[ks[-1]]] + moved if ks else []
        start = ks[-1] + 1 if ks else 0
        k = next((i for i in range(start, len(exhaustion))
                  if all(exhaustion[i].contains_region(X, strict=True) for X in need)), None)
        stage_notes = []
        if k is None:
            exhaustion.append(polydisc_hull(need + [exhaustion[-1]], margin))
            k = len(exhaustion) - 1
            stage_notes.append("exhaustion extended by a hull")
        L = exhaustion[k]
        esc = escape_index(tau, L)
        m = max(esc, math.ceil((2 + gap_ratio) * L.radii[0] / float(b)))
        ks.append(k)
        escs.append(esc)
        ms.append(m)
        moved.append(L.translate(complex(float(b * m))))
        notes.append(stage_notes)

    seed = (seed if seed is not None else default_seed(n - 1)).to_exact()
    plans = []
    for j, w in enumerate(words):
        if not w:
            continue
        L = _project_tail(exhaustion[ks[j]])
        target = w[0].h + Fraction(2 * (-1) ** n * ms[j]) * b
        slot = Slot(0, ms[j], target, L.translate(complex(float(b * ms[j]))), f"{j + 1}")
        plans.append(StagePlan(j + 1, L, eps_list[j] / 2, [slot]))
    try:
        series = build_series(b, plans, [seed], max_degree, measure=False) if plans else None
    except RungeInfeasible as exc:
        raise ScheduleInfeasible(str(exc), stage=exc.stage) from exc

    def s_upto(j: int) -> SparsePoly | None:
        if not words[0] and j == 1:
            return None
        return series.partial_sum(0, j)

    stages = []
    prev = None
    base_L = _enlarge(exhaustion[ks[0]], margin)
    for j, w in enumerate(words, start=1):
        L = exhaustion[ks[j - 1]]
        s = s_upto(j)
        stage_notes = notes[j - 1]
        a_err: dict = {}
        delta = lip = C = None
        delta_word = None
        b_err = None
        if s is None:
            stage_notes.append("identity target: F_1 = id, (a_1) holds trivially")
        else:
            for i in range(1, j + 1):
                wi = words[i - 1]
                if not wi:
                    stage_notes.append(f"(a_{j}) for the identity target of stage 1 is not representable "
                                       "by shears and is not checked")
                    continue
                Li = exhaustion[ks[i - 1]]
                a_err[i] = shear_distance(s, tau, ms[i - 1], wi[0].h, Li, grid).value
            Fj = make_F(n, SparsePoly.zero(n - 1), s, f"F{j}")
            reports = [(margin_report(wd, L, grid).value, str(wd))
                       for wd in enumerate_reduced_words((("tau", tau), ("F", Fj)), j)]
            delta, delta_word = min(reports)
            if delta == 0:
                raise ScheduleInfeasible(f"stage {j}: word {delta_word} collapses to the identity",
                                         stage=j, word=delta_word)
            lip = max(jacobian_norm(Fj.map, base_L, grid), jacobian_norm(Fj.inverse_map, base_L, grid), 1.0)
            C = j * lip
            if prev is None:
                if j > 1:
                    stage_notes.append(f"(b_{j}) not applicable: F_{j - 1} = id")
            else:
                diff = s - prev
                b_err = (_sup_on(diff, _project_tail(L), grid)
                         + _sup_on(diff, L.project(range(0, n - 1)), grid))
        stages.append(ScheduleStage(j, word_label(w), eps_list[j - 1], ks[j - 1] + 1, L, escs[j - 1],
                                    ms[j - 1], delta, delta_word, lip, C, a_err, b_err, stage_notes))
        prev = s
    invariants = _check_schedule(stages, tau)
    for st in stages:
        for i, e in st.a_errors.items():
            invariants.setdefault("a_conditions", True)
            invariants["a_conditions"] &= e < stages[i - 1].tolerance
        if st.b_error is not None:
            invariants.setdefault("b_conditions", True)
            invariants["b_conditions"] &= st.b_error < st.tolerance
    bad = [k for k, v in invariants.items() if not v]
    result = StageSchedule(tau, exhaustion, stages, series.functions[0] if series else None, invariants)
    if bad:
        raise ScheduleInfeasible(f"schedule invariants violated: {', '.join(bad)}")
    return result
