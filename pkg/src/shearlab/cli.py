"""Command line front end: ``shearlab <subcommand> [--config FILE] [--out DIR] ...``.

Every subcommand writes ``report.json`` (plus CSV curves where relevant) and
exits with 0 on success, 1 when a verification or tolerance fails and 2 on
invalid input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import densegroup as dg
from .polycore import PolyError, QQi, SparsePoly, parse_poly, poly_to_json
from .regions import GridSpec, Polydisc, RegionError, region_from_json
from .reports import write_report, write_text
from .runge import (
    DisjointPair,
    PiecewiseTarget,
    RungeInfeasible,
    birkhoff_pair,
    blend_coefficient,
    hypercyclic_orbit_error,
    runge_piecewise,
)
from .shearcalc import NotRepresentableError, identity_suite, transposition_audit
from .translations import (
    DanielewskiSurface,
    DiagonalTranslation,
    danielewski_cocycle_check,
    danielewski_translation,
    escape_index,
    escape_curve,
    surface_escape_probe,
    surface_sample,
    zajac_check,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
OUT_ENV = "SHEARLAB_OUT"


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config helpers


def _load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise InputError(f"config file {args.config} not found") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise InputError("config must be a JSON object")
    for flag, key in (("seed", "seed"), ("grid", "grid"), ("tol", "tol"), ("max_degree", "max_degree")):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[key] = value
    for key, value in vars(args).items():
        if key.startswith("opt_") and value is not None:
            cfg[key[4:]] = value
    return cfg


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    if isinstance(v, str):
        return complex(v.replace(" ", "").replace("i", "j"))
    if isinstance(v, (int, float)):
        return complex(v)
    raise InputError(f"cannot read complex number {v!r}")


def _region(spec, dim: int | None = None) -> Polydisc:
    """``{"center": c, "radius": r}`` (c a number, "a+bi" string or list of those) or a region record."""
    if not isinstance(spec, dict):
        raise InputError(f"region must be an object, got {spec!r}")
    if "type" in spec:
        K = region_from_json(spec)
    else:
        try:
            c = spec["center"]
            r = spec["radius"]
        except KeyError as exc:
            raise InputError(f"region needs {exc}") from None
        centers = [_complex(x) for x in c] if isinstance(c, list) and not (
            len(c) == 2 and dim == 1 and all(isinstance(x, (int, float)) for x in c)) else [_complex(c)]
        if dim is not None and len(centers) == 1 and dim > 1:
            centers = centers * dim
        K = Polydisc.ball(tuple(centers), float(r))
    if dim is not None and K.dim != dim:
        raise InputError(f"region has dimension {K.dim}, expected {dim}")
    return K


def _poly(expr, nvars: int, offset: int = 1) -> SparsePoly:
    if isinstance(expr, (int, float)) and not isinstance(expr, bool):
        expr = str(Fraction(expr))
    if not isinstance(expr, str):
        raise InputError(f"polynomial must be a string, got {expr!r}")
    names = [f"z{k + offset}" for k in range(nvars)]
    if nvars == 1 and "z" in expr and not any(nm in expr for nm in names):
        names = ["z"]
    return parse_poly(expr, nvars, names)


def _grid(cfg, default: int = 9) -> GridSpec:
    return GridSpec(_int(cfg, "grid", default, 2))


def _positive(cfg, key, default):
    v = cfg.get(key, default)
    try:
        v = float(v)
    except (TypeError, ValueError):
        raise InputError(f"{key} must be a number") from None
    if not v > 0:
        raise InputError(f"{key} must be positive")
    return v


def _int(cfg, key, default, minimum=None):
    v = cfg.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise InputError(f"{key} must be an integer")
    if minimum is not None and v < minimum:
        raise InputError(f"{key} must be at least {minimum}")
    return v


def _rational(v) -> Fraction:
    try:
        return Fraction(str(v))
    except (ValueError, ZeroDivisionError):
        raise InputError(f"cannot read rational number {v!r}") from None


# ---------------------------------------------------------------------------
# Subcommands; each returns (result dict, passed flag) and may write extra files.


def cmd_identities(cfg, out: Path):
    ns = cfg.get("n", [2, 3, 4, 5])
    ns = [ns] if isinstance(ns, int) else list(ns)
    if not ns or any(not isinstance(n, int) or n < 2 for n in ns):
        raise InputError("n must be an integer >= 2 or a list of them")
    seed = _int(cfg, "seed", 0)
    result = {"suites": {}}
    passed = True
    for n in ns:
        checks = identity_suite(n, seed=seed, degree=_int(cfg, "degree", 3, 0))
        result["suites"][str(n)] = [c.to_json() for c in checks]
        passed &= all(c.holds for c in checks)
    if 2 in ns:
        audit = transposition_audit()
        result["transposition_audit"] = {
            "printed_identity": audit["printed_certificate"].to_json(),
            "alternative_identity": audit["alternative_certificate"].to_json(),
            "printed_map": audit["printed"].to_json(),
            "t": audit["t"].to_json(),
        }
        passed &= audit["alternative_certificate"].verdict
    return result, passed


def _pair(cfg) -> DisjointPair:
    K1 = _region(cfg.get("K1", {"center": 0, "radius": 1}))
    K2 = _region(cfg.get("K2", {"center": 8, "radius": 1}))
    return DisjointPair(K1, K2, int(cfg.get("axis", 0)))


def cmd_runge(cfg, out: Path):
    pair = _pair(cfg)
    eps = _positive(cfg, "tol", cfg.get("eps", 1e-6))
    max_degree = _int(cfg, "max_degree", 80, 1)
    result: dict = {"pair": pair.to_json()}
    ladder = cfg.get("ladder", [20, 40, 80])
    if "targets" in cfg:
        t = cfg["targets"]
        target = PiecewiseTarget(_poly(t.get("h1", "1"), pair.dim), _poly(t.get("h2", "0"), pair.dim))
        try:
            cert = runge_piecewise(pair, target, eps, max_degree)
        except RungeInfeasible as exc:
            result["error"] = str(exc)
            result["best"] = exc.best.to_json() if exc.best is not None else None
            return result, False
        result["certificate"] = cert.to_json()
        return result, cert.reached
    steps = []
    for d in ladder:
        try:
            c = blend_coefficient(pair, eps, int(d))
        except RungeInfeasible as exc:
            c = exc.best
        steps.append({"max_degree": int(d), "degree": c.degree, "err1": c.err1, "err2": c.err2,
                      "reached": c.reached})
    result["ladder"] = steps
    try:
        cert = blend_coefficient(pair, eps, max_degree)
    except RungeInfeasible as exc:
        result["error"] = str(exc)
        result["best"] = exc.best.to_json()
        return result, False
    result["certificate"] = cert.to_json()
    return result, cert.reached


def _interleave(targets: list, J: int) -> list[tuple]:
    k = len(targets)
    return [(targets[(2 * j) % k], targets[(2 * j + 1) % k]) for j in range(J)]


def cmd_birkhoff(cfg, out: Path):
    b = _rational(cfg.get("b", 5))
    if not b > 0:
        raise InputError("b must be positive")
    dim = _int(cfg, "dim", 1, 1)
    J = _int(cfg, "J", 3, 1)
    raw = cfg.get("targets", ["1", "z", "z^2"])
    if not raw:
        raise InputError("targets must be a nonempty list")
    targets = [_poly(t, dim) for t in raw]
    pairs = _interleave(targets, J)
    tol = cfg.get("tolerances") or [float(cfg.get("tol", 1.0)) * 2.0 ** -(j + 1) for j in range(J)]
    base = _region(cfg["base"], dim) if "base" in cfg else Polydisc.unit(dim)
    try:
        f, g, sched = birkhoff_pair(b, pairs, J, base=base, tolerances=[float(t) for t in tol],
                                    gap_ratio=_positive(cfg, "gap_ratio", 4.0),
                                    max_degree=_int(cfg, "max_degree", 400, 1), dim=dim)
    except RungeInfeasible as exc:
        return {"error": str(exc), "failing_stage": exc.stage}, False
    tau = DiagonalTranslation(dim, b)
    last = sched.stages[-1]
    curve = hypercyclic_orbit_error(f, tau, last.targets[0], base, range(0, last.m_odd + 2), _grid(cfg))
    write_text(out, "orbit_f.csv", curve.to_csv())
    result = {"schedule": sched.to_json(), "f": poly_to_json(f), "g": poly_to_json(g),
              "f_degree": f.degree, "g_degree": g.degree,
              "orbit_curve": {"file": "orbit_f.csv", "argmin": curve.argmin,
                              "target": str(last.targets[0]), "scheduled_m": last.m_odd}}
    return result, sched.all_hold()


def _tau(cfg, n_default=2) -> DiagonalTranslation:
    n = _int(cfg, "n", n_default, 1)
    b = _rational(cfg.get("b", 1))
    if not b > 0:
        raise InputError("b must be positive")
    return DiagonalTranslation(n, b)


def cmd_conjugate(cfg, out: Path):
    tau = _tau(cfg)
    n = tau.n
    if n < 2:
        raise InputError("n must be at least 2")
    g = _poly(cfg.get("g", "z2^2"), n - 1, offset=2)
    ms = cfg.get("m", [2])
    ms = [ms] if isinstance(ms, int) else ms
    F = dg.shear_map(n, g)
    rows = []
    passed = True
    for m in ms:
        comp = dg.conjugate_by_power(F, tau, int(m))
        formula = dg.conjugate_formula(n, g, tau, int(m))
        ok = comp == formula
        passed &= ok
        rows.append({"m": int(m), "last_component": str(comp.components[-1].as_poly()),
                     "drift_constant": dg.drift_constant(n, tau.b_exact, int(m)), "exact_match": ok})
    return {"g": str(g), "tau": tau.to_json(), "conjugates": rows}, passed


def cmd_dense2gen(cfg, out: Path):
    tau = _tau(cfg)
    K = _region(cfg["K"], tau.n) if "K" in cfg else Polydisc.unit(tau.n)
    eps = _positive(cfg, "tol", cfg.get("eps", 1e-3))
    seed_poly = _poly(cfg["seed_poly"], tau.n - 1, offset=2) if "seed_poly" in cfg else None
    grid = _grid(cfg)
    try:
        rep = dg.two_generator_experiment(
            tau, cfg.get("targets", ["I", "F(z2)", "F(z2^2)"]), K, eps, seed=seed_poly,
            max_degree=_int(cfg, "max_degree", 400, 1), gap_ratio=_positive(cfg, "gap_ratio", 8.0),
            word_length=_int(cfg, "word_length", 4, 1),
            margin_threshold=_positive(cfg, "margin_threshold", 1e-3), grid=grid)
    except dg.ScheduleInfeasible as exc:
        return {"error": str(exc), "failing_stage": exc.stage}, False
    powers = sorted({m for st in (rep.schedule.stages if rep.schedule else [])
                     for m in (st.m_odd, st.m_even)})
    for i, r in enumerate(rep.results):
        if len(r.word) == 1:
            lines = ["m,sup_error"]
            for m in powers:
                lines.append(f"{m},{dg.shear_distance(rep.g, tau, m, r.word[0].h, K, grid).value!r}")
            write_text(out, f"target_{i}.csv", "\n".join(lines) + "\n")
    return rep.to_json(), rep.success


def cmd_danielewski(cfg, out: Path):
    p = _poly(cfg.get("p", "z^2 - 1"), 1)
    try:
        S = DanielewskiSurface(p)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    a = _rational(cfg.get("a", 1))
    if a == 0:
        raise InputError("a must be nonzero")
    seed = _int(cfg, "seed", 0)
    t = danielewski_translation(S, a)
    invariant = t.invariance_residual().is_zero()
    rng = np.random.default_rng(seed)
    cocycle = []
    for _ in range(_int(cfg, "pairs", 10, 0)):
        x, y = (Fraction(int(rng.integers(-9, 10)) or 1, int(rng.integers(1, 10))) for _ in range(2))
        cocycle.append(danielewski_cocycle_check(S, x, y).to_json())
    point = cfg.get("point", [1, 0, 1])
    image = [str(c) for c in t(*[QQi(_rational(v)) for v in point])]
    samples = surface_sample(S, _int(cfg, "samples", 50, 2), seed=seed)
    curve = surface_escape_probe(S, a, samples, range(0, _int(cfg, "m_max", 12, 3) + 1))
    write_text(out, "escape.csv", curve.to_csv())
    increasing = curve.strictly_increasing_from(2)
    result = {"p": str(p), "a": a, "q": str(t.q), "invariance": invariant, "cocycle": cocycle,
              "point": [str(v) for v in point], "image": image, "escape_curve": "escape.csv",
              "escape_increasing_from_2": increasing}
    return result, invariant and all(c["holds"] for c in cocycle) and increasing


def cmd_zajac(cfg, out: Path):
    tau = _tau(cfg)
    K = _region(cfg["K"], tau.n) if "K" in cfg else Polydisc.unit(tau.n)
    esc = escape_index(tau, K)
    ms = cfg.get("m", [esc - 1, esc] if esc > 1 else [esc])
    ms = [ms] if isinstance(ms, int) else ms
    verdicts = {str(m): zajac_check(tau, K, int(m)).to_json() for m in ms}
    # pairwise distances over the full product grid; a coarser default keeps this quick
    pts = K.sample(_grid(cfg, 5))
    curve = escape_curve(lambda x, m: tau.apply(x, m), pts, range(0, esc + 3))
    write_text(out, "escape.csv", curve.to_csv())
    passed = zajac_check(tau, K, esc).holds
    return {"escape_index": esc, "checks": verdicts, "escape_curve": "escape.csv"}, passed


def cmd_schedule(cfg, out: Path):
    tau = _tau(cfg)
    comps = [_region(c, tau.n) for c in cfg.get("compacts", [])] or [Polydisc.unit(tau.n)]
    try:
        sched = dg.schedule_build(cfg.get("targets", ["id", "F(z2)", "F(z2^2)"]), comps, tau,
                                  eps=_positive(cfg, "tol", cfg.get("eps", 1e-2)),
                                  max_degree=_int(cfg, "max_degree", 400, 1), grid=_grid(cfg))
    except dg.ScheduleInfeasible as exc:
        return {"error": str(exc), "failing_stage": exc.stage, "word": exc.word}, False
    return sched.to_json(), True


COMMANDS = {
    "identities": cmd_identities,
    "runge": cmd_runge,
    "birkhoff": cmd_birkhoff,
    "conjugate": cmd_conjugate,
    "dense2gen": cmd_dense2gen,
    "danielewski": cmd_danielewski,
    "zajac": cmd_zajac,
    "schedule": cmd_schedule,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shearlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./out)")
        p.add_argument("--seed", type=int)
        p.add_argument("--grid", type=int, help="grid points per real dimension")
        p.add_argument("--tol", type=float)
        p.add_argument("--max-degree", dest="max_degree", type=int)
        if name in ("identities", "conjugate", "dense2gen", "zajac", "schedule"):
            p.add_argument("--n", dest="opt_n", type=int)
        if name in ("conjugate", "dense2gen", "zajac", "schedule", "birkhoff"):
            p.add_argument("--b", dest="opt_b", type=str)
    return parser


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise InputError(f"a subcommand is required: {', '.join(COMMANDS)}")
        cfg = _load_config(args)
        out = Path(args.out or os.environ.get(OUT_ENV, "out"))
        result, passed = COMMANDS[args.command](cfg, out)
    except (InputError, RegionError, PolyError, NotRepresentableError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    status = "passed" if passed else "failed"
    path = write_report(out, args.command, cfg, result, status)
    print(f"{args.command}: {status} ({path})")
    return EXIT_OK if passed else EXIT_FAIL


def main() -> None:
    sys.exit(run())
