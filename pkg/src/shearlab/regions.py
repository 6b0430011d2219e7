"""Compact regions in complex n-space and deterministic sample grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np


class RegionError(ValueError):
    pass


def _as_cvec(values) -> tuple[complex, ...]:
    if isinstance(values, (int, float, complex)):
        values = (values,)
    out = []
    for v in values:
        if isinstance(v, (list, tuple)) and len(v) == 2:
            v = complex(float(v[0]), float(v[1]))
        out.append(complex(v))
    return tuple(out)


@dataclass(frozen=True)
class GridSpec:
    """Sampling rule: ``points`` Chebyshev-Lobatto radii and ``points`` angles per disc.

    Radii cluster toward the boundary circle, which is where the maximum
    principle places the extremes of holomorphic maps.
    """

    points: int = 9

    def __post_init__(self):
        if self.points < 2:
            raise RegionError("grid needs at least 2 points per real dimension")

    def to_json(self) -> dict:
        return {"kind": "chebyshev-lobatto-polar", "points": self.points}

    def disc_offsets(self) -> np.ndarray:
        """Sample offsets in the closed unit disc (centre included once)."""
        n = self.points
        radii = (1 - np.cos(np.pi * np.arange(1, n) / (n - 1))) / 2
        angles = 2 * np.pi * np.arange(n) / n
        ring = (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()
        return np.concatenate([[0j], ring])


@dataclass(frozen=True)
class Polydisc:
    """Closed polydisc: product of discs ``|z_i - center_i| <= radii_i``."""

    center: tuple
    radii: tuple

    def __post_init__(self):
        c = _as_cvec(self.center)
        r = self.radii
        r = tuple(float(x) for x in (r if isinstance(r, (list, tuple)) else [r] * len(c)))
        if len(r) != len(c):
            raise RegionError("one radius per coordinate expected")
        if not c:
            raise RegionError("a polydisc needs at least one coordinate")
        if any(not math.isfinite(x) or x < 0 for x in r):
            raise RegionError("radii must be finite and non-negative")
        if any(not (math.isfinite(v.real) and math.isfinite(v.imag)) for v in c):
            raise RegionError("centre must be finite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radii", r)

    @classmethod
    def ball(cls, center, radius: float) -> "Polydisc":
        c = _as_cvec(center)
        return cls(c, (float(radius),) * len(c))

    @classmethod
    def unit(cls, n: int) -> "Polydisc":
        return cls((0j,) * n, (1.0,) * n)

    @property
    def dim(self) -> int:
        return len(self.center)

    convex = True

    def translate(self, shift) -> "Polydisc":
        s = _as_cvec(shift)
        if len(s) == 1 and self.dim > 1:
            s = s * self.dim
        return Polydisc(tuple(c + d for c, d in zip(self.center, s)), self.radii)

    def project(self, coords: Sequence[int]) -> "Polydisc":
        return Polydisc(tuple(self.center[i] for i in coords), tuple(self.radii[i] for i in coords))

    def real_extent(self, coord: int = 0) -> tuple[float, float]:
        c, r = self.center[coord], self.radii[coord]
        return c.real - r, c.real + r

    def support(self, v: np.ndarray) -> float:
        """``max Re <z, v>`` over the polydisc."""
        c = np.asarray(self.center)
        return float(np.sum((c * np.conj(v)).real) + np.sum(np.asarray(self.radii) * np.abs(v)))

    def support_point(self, v: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=complex)
        mag = np.abs(v)
        unit = np.where(mag > 0, v / np.where(mag > 0, mag, 1), 0)
        return c + np.asarray(self.radii) * unit

    def contains(self, z, tol: float = 0.0) -> bool:
        z = np.asarray(z, dtype=complex)
        return bool(np.all(np.abs(z - np.asarray(self.center)) <= np.asarray(self.radii) + tol))

    def contains_region(self, other: "Region", strict: bool = True) -> bool:
        """Containment in the interior (``strict``) or in the closed set."""
        if isinstance(other, Polydisc):
            gaps = [
                r - (abs(c - oc) + orad)
                for c, r, oc, orad in zip(self.center, self.radii, other.center, other.radii)
            ]
            return all(g > 0 for g in gaps) if strict else all(g >= 0 for g in gaps)
        if isinstance(other, ConvexHull):
            pts = np.asarray(other.points)
            d = np.abs(pts - np.asarray(self.center)[None, :]) - np.asarray(self.radii)[None, :]
            return bool(np.all(d < 0)) if strict else bool(np.all(d <= 0))
        if isinstance(other, RegionUnion):
            return all(self.contains_region(p, strict) for p in other.parts)
        raise RegionError(f"unsupported region {type(other).__name__}")

    def sample(self, grid: GridSpec) -> np.ndarray:
        offsets = grid.disc_offsets()
        axes = [c + r * offsets for c, r in zip(self.center, self.radii)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_json(self) -> dict:
        return {
            "type": "polydisc",
            "center": [[c.real, c.imag] for c in self.center],
            "radii": list(self.radii),
        }


@dataclass(frozen=True)
class ConvexHull:
    """Convex hull of finitely many points."""

    points: tuple

    def __post_init__(self):
        pts = tuple(_as_cvec(p) for p in self.points)
        if not pts:
            raise RegionError("empty point set")
        if len({len(p) for p in pts}) != 1:
            raise RegionError("points of different dimension")
        for p in pts:
            if any(not (math.isfinite(v.real) and math.isfinite(v.imag)) for v in p):
                raise RegionError("points must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return len(self.points[0])

    convex = True

    def translate(self, shift) -> "ConvexHull":
        s = _as_cvec(shift)
        if len(s) == 1 and self.dim > 1:
            s = s * self.dim
        return ConvexHull(tuple(tuple(a + b for a, b in zip(p, s)) for p in self.points))

    def project(self, coords: Sequence[int]) -> "ConvexHull":
        return ConvexHull(tuple(tuple(p[i] for i in coords) for p in self.points))

    def real_extent(self, coord: int = 0) -> tuple[float, float]:
        xs = [p[coord].real for p in self.points]
        return min(xs), max(xs)

    def support(self, v: np.ndarray) -> float:
        pts = np.asarray(self.points)
        return float(np.max((pts * np.conj(v)[None, :]).real.sum(axis=1)))

    def support_point(self, v: np.ndarray) -> np.ndarray:
        pts = np.asarray(self.points)
        return pts[int(np.argmax((pts * np.conj(v)[None, :]).real.sum(axis=1)))]

    def sample(self, grid: GridSpec) -> np.ndarray:
        pts = np.asarray(self.points, dtype=complex)
        extra = [pts.mean(axis=0)[None, :]]
        if len(pts) > 1:
            i, j = np.triu_indices(len(pts), 1)
            extra.append((pts[i] + pts[j]) / 2)
        return np.concatenate([pts] + extra, axis=0)

    def to_json(self) -> dict:
        return {"type": "hull", "points": [[[v.real, v.imag] for v in p] for p in self.points]}


@dataclass(frozen=True)
class RegionUnion:
    """Finite union of compacts (not convex in general)."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise RegionError("empty union")
        if len({p.dim for p in parts}) != 1:
            raise RegionError("union of regions of different dimension")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    convex = False

    def translate(self, shift) -> "RegionUnion":
        return RegionUnion(tuple(p.translate(shift) for p in self.parts))

    def project(self, coords: Sequence[int]) -> "RegionUnion":
        return RegionUnion(tuple(p.project(coords) for p in self.parts))

    def real_extent(self, coord: int = 0) -> tuple[float, float]:
        ext = [p.real_extent(coord) for p in self.parts]
        return min(e[0] for e in ext), max(e[1] for e in ext)

    def sample(self, grid: GridSpec) -> np.ndarray:
        return np.concatenate([p.sample(grid) for p in self.parts], axis=0)

    def to_json(self) -> dict:
        return {"type": "union", "parts": [p.to_json() for p in self.parts]}


Region = Union[Polydisc, ConvexHull, RegionUnion]


def region_from_json(data: dict) -> Region:
    try:
        kind = data["type"]
        if kind == "polydisc":
            center = [complex(float(c[0]), float(c[1])) if isinstance(c, (list, tuple)) else c
                      for c in data["center"]]
            radii = data["radii"] if "radii" in data else [data["radius"]] * len(center)
            return Polydisc(tuple(center), tuple(radii))
        if kind == "hull":
            return ConvexHull(tuple(tuple(_as_cvec(p)) for p in data["points"]))
        if kind == "union":
            return RegionUnion(tuple(region_from_json(p) for p in data["parts"]))
    except (KeyError, TypeError, IndexError) as exc:
        raise RegionError(f"malformed region record: {exc}") from None
    raise RegionError(f"unknown region type {data.get('type')!r}")


def bounding_polydisc(points: np.ndarray, margin: float = 0.0) -> Polydisc:
    """Smallest axis-centred polydisc (per-coordinate box centre) around sample points."""
    pts = np.asarray(points, dtype=complex)
    finite = np.all(np.isfinite(pts), axis=1)
    if not np.any(finite):
        raise RegionError("no finite points to bound")
    pts = pts[finite]
    centers = []
    radii = []
    for k in range(pts.shape[1]):
        col = pts[:, k]
        c = complex((col.real.min() + col.real.max()) / 2, (col.imag.min() + col.imag.max()) / 2)
        centers.append(c)
        radii.append(float(np.max(np.abs(col - c))) + margin)
    return Polydisc(tuple(centers), tuple(radii))


def polydisc_hull(pieces: Sequence[Polydisc], margin: float = 0.0) -> Polydisc:
    """A polydisc containing every piece, enlarged by ``margin`` in each coordinate."""
    if not pieces:
        raise RegionError("no pieces to enclose")
    centers, radii = [], []
    for k in range(pieces[0].dim):
        lo = min(p.center[k].real - p.radii[k] for p in pieces)
        hi = max(p.center[k].real + p.radii[k] for p in pieces)
        ilo = min(p.center[k].imag - p.radii[k] for p in pieces)
        ihi = max(p.center[k].imag + p.radii[k] for p in pieces)
        c = complex((lo + hi) / 2, (ilo + ihi) / 2)
        centers.append(c)
        radii.append(max(abs(p.center[k] - c) + p.radii[k] for p in pieces) + margin)
    return Polydisc(tuple(centers), tuple(radii))
