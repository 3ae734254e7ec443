"""The triod Y, its products, and the non-embeddability arithmetic.

Fibre search works on piecewise-linear maps ``Y -> R`` given by their values
on a mesh with ``m`` nodes per arm (node 0 of every arm is the centre).  The
largest fibre diameter of such a map is attained at one of the node values,
so scanning those levels exactly finds the worst fibre.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import LengthMismatch, UnsupportedDimension

WITNESS_TOLERANCE = 1e-6


@dataclass(frozen=True)
class TriodPoint:
    """Point at distance ``t`` from the centre along ``arm``."""

    arm: int
    t: object

    def __post_init__(self):
        if self.arm not in (0, 1, 2):
            raise ValueError("arm must be 0, 1 or 2")
        if not 0 <= self.t <= 1:
            raise ValueError("t must lie in [0, 1]")
        if self.t == 0 and self.arm != 0:
            object.__setattr__(self, "arm", 0)


def triod_distance(p: TriodPoint, q: TriodPoint):
    if p.arm == q.arm:
        return abs(p.t - q.t)
    return p.t + q.t


def product_distance(ps: Sequence[TriodPoint], qs: Sequence[TriodPoint]):
    """The l-infinity distance on Y^n."""
    if len(ps) != len(qs):
        raise LengthMismatch(f"{len(ps)} vs {len(qs)} coordinates")
    return max((triod_distance(p, q) for p, q in zip(ps, qs)), default=0)


class PLMap:
    """Piecewise-linear map on the triod from node values ``values[arm][i]``
    at ``t = i / (m - 1)``."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != 3:
            raise ValueError("values must have shape (3, m)")
        if values.shape[1] < 3:
            raise ValueError("mesh needs at least 3 nodes per arm")
        if not np.all(np.isfinite(values)):
            raise ValueError("map values must be finite")
        if not (values[0, 0] == values[1, 0] == values[2, 0]):
            raise ValueError("arms disagree at the centre")
        self.values = values
        self.m = values.shape[1]

    def __call__(self, p: TriodPoint) -> Fraction:
        """Exact value at a point with rational ``t``."""
        t = Fraction(p.t) * (self.m - 1)
        i = min(int(t), self.m - 2)
        frac = t - i
        a, b = Fraction(self.values[p.arm, i]), Fraction(self.values[p.arm, i + 1])
        return a + (b - a) * frac

    @classmethod
    def random(cls, m: int, rng: np.random.Generator) -> "PLMap":
        values = rng.normal(size=(3, m))
        values[:, 0] = values[0, 0]
        return cls(values)


class Witness(NamedTuple):
    x: TriodPoint
    y: TriodPoint
    level: Fraction
    distance: Fraction

    def as_dict(self) -> dict:
        return {
            "x": {"arm": self.x.arm, "t": str(self.x.t)},
            "y": {"arm": self.y.arm, "t": str(self.y.t)},
            "level": float(self.level),
            "distance": float(self.distance),
        }


def _fibre(values: np.ndarray, level: float):
    """Fibre points (arm, float t) of the PL map over ``level``, exactly at
    nodes and by linear interpolation inside crossing segments."""
    m = values.shape[1]
    out = []
    for arm in range(3):
        v = values[arm]
        for i in range(m - 1):
            a, b = v[i], v[i + 1]
            if a == level:
                out.append((arm, i))
            elif (a - level) * (b - level) < 0:
                out.append((arm, i, a, b))
        if v[m - 1] == level:
            out.append((arm, m - 1))
    return out


def _exact_t(item, level: Fraction, m: int) -> Fraction:
    if len(item) == 2:
        return Fraction(item[1], m - 1)
    _, i, a, b = item
    a, b = Fraction(a), Fraction(b)
    return (i + (level - a) / (b - a)) / (m - 1)


def _approx_t(item, level: float, m: int) -> float:
    if len(item) == 2:
        return item[1] / (m - 1)
    _, i, a, b = item
    return (i + (level - a) / (b - a)) / (m - 1)


def fiber_collapse_search(f: PLMap, epsilon: float, n: int = 1) -> Witness | None:
    """Pair x, y with f(x) = f(y) and d_Y(x, y) >= epsilon, or None.

    Fibre diameters are piecewise linear in the level between consecutive
    node values, so the maximum is attained at a node value; every such level
    is scanned and the best pair is rebuilt in exact arithmetic.
    """
    if n != 1:
        raise UnsupportedDimension("fibre search is implemented for Y^1 only")
    m = f.m
    best = None
    best_d = -1.0
    for level in np.unique(f.values):
        pts = [(item[0], _approx_t(item, level, m), item) for item in _fibre(f.values, level)]
        if len(pts) < 2:
            continue
        # farthest pair: either two arms' outermost points, or one arm's extremes
        far = {}
        near = {}
        for arm, t, item in pts:
            if arm not in far or t > far[arm][0]:
                far[arm] = (t, item)
            if arm not in near or t < near[arm][0]:
                near[arm] = (t, item)
        cands = []
        arms = sorted(far)
        for i in range(len(arms)):
            for j in range(i + 1, len(arms)):
                cands.append((far[arms[i]][0] + far[arms[j]][0], far[arms[i]][1], far[arms[j]][1]))
        for arm in arms:
            cands.append((far[arm][0] - near[arm][0], near[arm][1], far[arm][1]))
        d, a, b = max(cands, key=lambda c: c[0])
        if d > best_d:
            best_d, best = d, (level, a, b)
    if best is None or best_d < epsilon - 1e-12:
        return None
    level, a, b = best
    exact_level = Fraction(level)
    x = TriodPoint(a[0], _exact_t(a, exact_level, m))
    y = TriodPoint(b[0], _exact_t(b, exact_level, m))
    d = triod_distance(x, y)
    if d < Fraction(epsilon) or abs(f(x) - f(y)) > WITNESS_TOLERANCE:
        return None
    return Witness(x, y, exact_level, d)


def read_pl_csv(text: str) -> PLMap:
    """Rows ``arm,node,value``; the centre may be listed once per arm or once."""
    rows = list(csv.reader(io.StringIO(text)))
    if rows and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]
    entries = [(int(r[0]), int(r[1]), float(r[2])) for r in rows if r]
    m = max(node for _, node, _ in entries) + 1
    values = np.full((3, m), np.nan)
    for arm, node, value in entries:
        values[arm, node] = value
    centre = values[:, 0][~np.isnan(values[:, 0])]
    if len(centre):
        values[:, 0] = centre[0]
    return PLMap(values)


def write_pl_csv(f: PLMap) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["arm", "node", "value"])
    for arm in range(3):
        for i in range(f.m):
            w.writerow([arm, i, repr(float(f.values[arm, i]))])
    return buf.getvalue()


@dataclass(frozen=True)
class CounterexampleParams:
    D: int
    L: int
    b: tuple[int, ...]
    c: tuple[int, ...]

    def __post_init__(self):
        if self.D < 1 or self.L < 0:
            raise ValueError("need D >= 1 and L >= 0")
        if len(self.b) != len(self.c):
            raise LengthMismatch("b and c must have equal length")
        if any(v < 1 for v in self.b) or any(v < 1 for v in self.c):
            raise ValueError("sequences must be positive")


def certificate_check(params: CounterexampleParams) -> int | None:
    """First index n (1-based) with 2 c_n > D (b_n + 2L), i.e. where an
    embedding with window constant L would be contradicted."""
    D, L = params.D, params.L
    for n, (b, c) in enumerate(zip(params.b, params.c), start=1):
        if 2 * c > D * (b + 2 * L):
            return n
    return None


def triod_evidence(maps: int, nodes: int, epsilon: float, seed: int) -> dict:
    """Run the fibre search on seeded random PL maps."""
    rng = np.random.default_rng(seed)
    found = 0
    worst = None
    rows = []
    for idx in range(maps):
        w = fiber_collapse_search(PLMap.random(nodes, rng), epsilon)
        if w is not None:
            found += 1
            worst = float(w.distance) if worst is None else min(worst, float(w.distance))
        rows.append({"map": idx, "witness": None if w is None else w.as_dict()})
    return {"maps": maps, "nodes_per_arm": nodes, "epsilon": epsilon, "witnessed": found,
            "missing": maps - found, "smallest_witness_distance": worst, "witnesses": rows}
