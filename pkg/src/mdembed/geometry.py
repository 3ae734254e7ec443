"""Metrics, certified open covers, partitions of unity and widim bounds.

Base metrics: ``2^-min{|i| : x_i != y_i}`` on subshifts, arc length on the
circle R/Z, and the maximum of the factor metrics on products.  The
dynamical metric ``d_a^b(x, y) = max_{a<=i<=b} d(T^i x, T^i y)`` is
:func:`window_sup`.

Only upper bounds on widim are produced.  Each cover carries a mesh bound
and an order bound; the sampling helpers check both against finite samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as cartesian
from typing import NamedTuple

import numpy as np

from . import clopen
from .clopen import ClopenSet
from .errors import BadEpsilon, Unsupported
from .systems import (
    AnglePoint,
    PairPoint,
    Point,
    SymbolicPoint,
    SystemDescriptor,
    admissible_words,
    apply_shift,
)

POU_TOLERANCE = 1e-12


class Distance(NamedTuple):
    """``value`` is exact when ``exact``; otherwise it is an upper bound and
    ``lower`` is the best certified lower bound."""

    value: float
    exact: bool
    lower: float


def _combine(parts) -> Distance:
    value = max(p.value for p in parts)
    lower = max(p.lower for p in parts)
    return Distance(value, lower == value, lower)


@dataclass(frozen=True)
class Metric:
    kind: str
    left: Metric | None = None
    right: Metric | None = None
    sys: SystemDescriptor | None = None
    a: int = 0
    b: int = 0

    def describe(self) -> str:
        if self.kind == "window_sup":
            return f"d_{self.a}^{self.b}[{self.left.describe()}]"
        if self.kind == "sup_product":
            return f"max({self.left.describe()}, {self.right.describe()})"
        return self.kind


SYMBOLIC = Metric("symbolic")
CIRCLE = Metric("circle")


def sup_product(left: Metric, right: Metric) -> Metric:
    return Metric("sup_product", left=left, right=right)


def window_sup(sys: SystemDescriptor, a: int, b: int, base: Metric | None = None) -> Metric:
    if a > b:
        raise ValueError("window_sup needs a <= b")
    return Metric("window_sup", left=base or metric_for(sys), sys=sys, a=a, b=b)


def metric_for(sys: SystemDescriptor) -> Metric:
    if sys.symbolic:
        return SYMBOLIC
    if sys.kind == "rotation":
        return CIRCLE
    return sup_product(metric_for(sys.left), metric_for(sys.right))


def circle_distance(p: AnglePoint, q: AnglePoint) -> float:
    modulus = 1 << p.bits
    d = (p.angle - q.angle) % modulus
    return min(d, modulus - d) / modulus


def symbolic_distance(p: SymbolicPoint, q: SymbolicPoint) -> Distance:
    r = min(p.radius, q.radius)
    for i in range(r + 1):
        if p.symbol(i) != q.symbol(i) or p.symbol(-i) != q.symbol(-i):
            v = 2.0**-i
            return Distance(v, True, v)
    return Distance(2.0 ** -(r + 1), False, 0.0)


def distance(m: Metric, p: Point, q: Point) -> Distance:
    if m.kind == "symbolic":
        return symbolic_distance(p, q)
    if m.kind == "circle":
        v = circle_distance(p, q)
        return Distance(v, True, v)
    if m.kind == "sup_product":
        return _combine([distance(m.left, p.left, q.left), distance(m.right, p.right, q.right)])
    parts = []
    for i in range(m.a, m.b + 1):
        parts.append(distance(m.left, apply_shift(m.sys, p, i), apply_shift(m.sys, q, i)))
    return _combine(parts)


# ---------------------------------------------------------------------------
# Regions and covers


@dataclass(frozen=True)
class Whole:
    def contains(self, p) -> bool:
        return True

    def weight(self, p) -> float:
        return 1.0

    def describe(self) -> str:
        return "whole"


@dataclass(frozen=True)
class Arc:
    """Open arc of half-width 1/m centred at j/m, carrying the tent weight."""

    j: int
    m: int

    @property
    def center(self) -> float:
        return self.j / self.m

    def weight(self, p: AnglePoint) -> float:
        d = min(abs(p.value - self.center), 1.0 - abs(p.value - self.center))
        return max(0.0, 1.0 - self.m * d)

    def contains(self, p: AnglePoint) -> bool:
        return self.weight(p) > 0.0

    def describe(self) -> str:
        return f"arc({self.j}/{self.m} +- 1/{self.m})"


@dataclass(frozen=True)
class Cylinder:
    anchor: int
    word: str

    def contains(self, p: SymbolicPoint) -> bool:
        return p.segment(self.anchor, len(self.word)) == self.word

    def weight(self, p: SymbolicPoint) -> float:
        return 1.0 if self.contains(p) else 0.0

    def describe(self) -> str:
        return f"{self.anchor}:{self.word}"


@dataclass(frozen=True)
class ProductRegion:
    left: object
    right: object

    def contains(self, p: PairPoint) -> bool:
        return self.left.contains(p.left) and self.right.contains(p.right)

    def weight(self, p: PairPoint) -> float:
        return self.left.weight(p.left) * self.right.weight(p.right)

    def describe(self) -> str:
        return f"{self.left.describe()} x {self.right.describe()}"


class Cover:
    """A finite open cover with mesh/order certificates and a partition of
    unity given by the regions' weights."""

    kind = "generic"

    def __init__(self, regions, mesh: float, order: int, metric: Metric):
        self.regions = list(regions)
        self.mesh = mesh
        self.order = order
        self.metric = metric

    def __len__(self):
        return len(self.regions)

    def active(self, p) -> list[tuple[int, float]]:
        """(index, weight) for every region whose weight is positive at p."""
        out = []
        for i, r in enumerate(self.regions):
            w = r.weight(p)
            if w > 0.0:
                out.append((i, w))
        return out

    def weights(self, p) -> np.ndarray:
        w = np.zeros(len(self.regions))
        for i, v in self.active(p):
            w[i] = v
        return w

    def representative(self, i: int):
        raise NotImplementedError

    def report(self) -> dict:
        return {
            "kind": self.kind,
            "regions": len(self.regions),
            "mesh": self.mesh,
            "order": self.order,
            "metric": self.metric.describe(),
        }


class TrivialCover(Cover):
    kind = "single"

    def __init__(self, mesh: float, metric: Metric, point):
        super().__init__([Whole()], mesh, 0, metric)
        self._point = point

    def active(self, p):
        return [(0, 1.0)]

    def representative(self, i):
        return self._point


class ArcCover(Cover):
    kind = "arcs"

    def __init__(self, m: int, bits: int = 64):
        super().__init__([Arc(j, m) for j in range(m)], 2.0 / m, 1, CIRCLE)
        self.m = m
        self.bits = bits

    def active(self, p: AnglePoint):
        # same arithmetic as Arc.weight, inlined for speed
        m = self.m
        v = p.value
        j = math.floor(v * m) % m
        out = []
        for i in (j, (j + 1) % m):
            d = abs(v - i / m)
            w = 1.0 - m * min(d, 1.0 - d)
            if w > 0.0:
                out.append((i, w))
        return out

    def representative(self, i: int) -> AnglePoint:
        return AnglePoint(((i << self.bits) // self.m), self.bits)


class CylinderCover(Cover):
    """Partition of a clopen set into cylinders over one window."""

    kind = "cylinders"

    def __init__(self, sys: SystemDescriptor, anchor: int, words, mesh: float, metric: Metric):
        words = sorted(words)
        super().__init__([Cylinder(anchor, w) for w in words], mesh, 0, metric)
        self.sys = sys
        self.anchor = anchor
        self.length = len(words[0]) if words else 0
        self._index = {w: i for i, w in enumerate(words)}

    def active(self, p: SymbolicPoint):
        i = self._index.get(p.segment(self.anchor, self.length))
        return [] if i is None else [(i, 1.0)]

    def representative(self, i: int) -> SymbolicPoint:
        r = self.regions[i]
        return SymbolicPoint(r.anchor, r.word, "language")


class ProductCover(Cover):
    kind = "product"

    def __init__(self, first: Cover, second: Cover):
        regions = [ProductRegion(a, b) for a, b in cartesian(first.regions, second.regions)]
        super().__init__(regions, max(first.mesh, second.mesh), first.order + second.order,
                         sup_product(first.metric, second.metric))
        self.first = first
        self.second = second

    def active(self, p: PairPoint):
        n2 = len(self.second)
        left = self.first.active(p.left)
        right = self.second.active(p.right)
        return [(i * n2 + j, a * b) for i, a in left for j, b in right]

    def representative(self, i: int) -> PairPoint:
        n2 = len(self.second)
        return PairPoint(self.first.representative(i // n2), self.second.representative(i % n2))

    def report(self) -> dict:
        out = super().report()
        out["factors"] = [self.first.report(), self.second.report()]
        return out


def arc_count(epsilon: float) -> int:
    """Least m with 2/m < epsilon."""
    return math.floor(2.0 / epsilon) + 1


def arc_cover(epsilon: float, bits: int = 64) -> Cover:
    """Tent-weighted arcs of length 2/m < epsilon; order 1.  For epsilon above
    the circle's diameter 1/2 a single region suffices."""
    if not epsilon > 0:
        raise BadEpsilon("epsilon must be positive")
    if epsilon > 0.5:
        return TrivialCover(0.5, CIRCLE, AnglePoint(0, bits))
    return ArcCover(arc_count(epsilon), bits)


def cylinder_radius(epsilon: float) -> int:
    return max(0, math.ceil(math.log2(1.0 / epsilon)))


def cylinder_cover(sys: SystemDescriptor, epsilon: float, horizon: int = 1, within: ClopenSet | None = None) -> Cover:
    """Partition into cylinders on [-L, L + horizon - 1], L = ceil(log2(1/eps)).

    Two points in one cylinder agree on [-L, L] after every shift
    0..horizon-1, so the mesh under d_0^{horizon-1} is at most 2^-(L+1).
    With ``within`` the partition is restricted to that clopen set.
    """
    if not epsilon > 0:
        raise BadEpsilon("epsilon must be positive")
    L = cylinder_radius(epsilon)
    anchor, length = -L, 2 * L + horizon
    if within is None:
        words = admissible_words(sys, length)
    else:
        lo = min(anchor, within.anchor) if not within.is_empty() else anchor
        hi = max(anchor + length, within.stop) if not within.is_empty() else anchor + length
        anchor, length = lo, hi - lo
        words = clopen.refine(within, anchor, length, cap=max(clopen.WINDOW_CAP, length)).words if not within.is_empty() else ()
    metric = window_sup(sys, 0, horizon - 1)
    return CylinderCover(sys, anchor, words, 2.0 ** -(L + 1), metric)


def product_cover(c1: Cover, c2: Cover) -> Cover:
    return ProductCover(c1, c2)


def cover_order_exact(sets) -> int:
    """(size of the largest subfamily with a common element) - 1, for
    finite sets; -1 for a family with no elements at all."""
    counts: dict = {}
    for s in sets:
        for x in s:
            counts[x] = counts.get(x, 0) + 1
    return max(counts.values(), default=0) - 1


# ---------------------------------------------------------------------------
# Sampled verification


def pou_defect(cover: Cover, points) -> float:
    """max |sum of weights - 1| over the sample."""
    return max(abs(sum(w for _, w in cover.active(p)) - 1.0) for p in points)


def support_violations(cover: Cover, points) -> int:
    """Count of (point, region) pairs with positive weight outside the region."""
    bad = 0
    for p in points:
        for i, w in cover.active(p):
            if w > 0 and not cover.regions[i].contains(p):
                bad += 1
    return bad


def sampled_order(cover: Cover, points) -> int:
    members = [set() for _ in cover.regions]
    for n, p in enumerate(points):
        for i, _ in cover.active(p):
            members[i].add(n)
    return cover_order_exact(members)


def sampled_mesh(cover: Cover, points, metric: Metric | None = None, max_pairs_per_region: int = 200) -> float:
    """Largest sampled distance between two points sharing a region."""
    metric = metric or cover.metric
    buckets: dict[int, list] = {}
    for p in points:
        for i, _ in cover.active(p):
            buckets.setdefault(i, []).append(p)
    worst = 0.0
    for pts in buckets.values():
        count = 0
        for a in range(len(pts)):
            for b in range(a + 1, len(pts)):
                worst = max(worst, distance(metric, pts[a], pts[b]).value)
                count += 1
                if count >= max_pairs_per_region:
                    break
            if count >= max_pairs_per_region:
                break
    return worst


# ---------------------------------------------------------------------------
# widim and mean dimension


@dataclass(frozen=True)
class WidimBound:
    bound: int
    cover: Cover
    horizon: int
    epsilon: float


def _catalogue_cover(space: SystemDescriptor, k: int, epsilon: float, within) -> Cover:
    if space.kind == "rotation":
        # rotations are isometries: d_0^{k-1} = d
        return arc_cover(epsilon, space.bits)
    if space.symbolic:
        return cylinder_cover(space, epsilon, k, within)
    if space.kind == "product":
        return product_cover(_catalogue_cover(space.left, k, epsilon, None),
                             _catalogue_cover(space.right, k, epsilon, within))
    raise Unsupported(f"no widim bound for {space.describe()}")


def widim_upper(space: SystemDescriptor, k: int, epsilon: float, within: ClopenSet | None = None) -> WidimBound:
    """Certified upper bound on widim_eps(space, d_0^{k-1}) with its cover.

    ``within`` restricts the symbolic factor (the right factor of a product)
    to a clopen set.
    """
    if k < 1:
        raise ValueError("horizon must be at least 1")
    if not epsilon > 0:
        raise BadEpsilon("epsilon must be positive")
    cover = _catalogue_cover(space, k, epsilon, within)
    if not cover.mesh < epsilon:
        raise BadEpsilon(f"cover mesh {cover.mesh} is not below epsilon {epsilon}")
    return WidimBound(cover.order, cover, k, epsilon)


def mdim_estimate(space: SystemDescriptor, epsilon: float, k_max: int) -> list[tuple[int, float]]:
    """widim upper bound / k for k = 1..k_max."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    return [(k, widim_upper(space, k, epsilon).bound / k) for k in range(1, k_max + 1)]
