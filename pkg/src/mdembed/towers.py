"""Kakutani-Rokhlin towers over an aperiodic subshift.

For a parameter N the construction produces a clopen base B whose first
return time lies in {N+1, ..., 2N+1}, and represents the subshift as the
special system over (B, T_B, h).  Every property of the tower is checked by
exact clopen algebra and recorded in ``Tower.certificates``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

from . import clopen
from .clopen import ClopenSet, WINDOW_CAP, shift_set
from .errors import AperiodicityRequired, InsufficientWindow, InvariantViolation, NotInBase
from .systems import SymbolicPoint, SystemDescriptor, admissible_words, apply_shift, certify_aperiodic

log = logging.getLogger(__name__)


def marker_window_length(sys: SystemDescriptor, N: int) -> int:
    """Least L such that no admissible word of length L has a period <= N.

    Each cylinder [w]_0 on such a word is disjoint from its shifts by
    1, ..., N, and together these cylinders cover the subshift.
    """
    cert = certify_aperiodic(sys, N)
    if not cert.aperiodic:
        raise AperiodicityRequired(f"{sys.describe()} has a periodic point {cert.periodic_block!r}^inf of period <= {N}")
    return cert.witness_length


def markers(sys: SystemDescriptor, N: int) -> list[ClopenSet]:
    L = marker_window_length(sys, N)
    return [clopen.cylinder(sys, w, 0) for w in sorted(admissible_words(sys, L))]


def _neighbourhood(V: ClopenSet, N: int, cap: int) -> ClopenSet:
    return clopen.union_all([shift_set(V, i) for i in range(-N, N + 1)], cap)


def base_certificates(B: ClopenSet, N: int, cap: int = WINDOW_CAP) -> dict[str, bool]:
    disjoint = all(clopen.intersect(B, shift_set(B, k), cap).is_empty() for k in range(1, N + 1))
    covering = clopen.union_all([shift_set(B, k) for k in range(1, 2 * N + 2)], cap).is_full()
    return {"disjoint_shifts": disjoint, "covering": covering}


def build_base(sys: SystemDescriptor, N: int, cap: int = WINDOW_CAP, debug: bool = False) -> ClopenSet:
    """Inductive marker construction: V_{l+1} = V_l | (U_{l+1} - S^[-N,N] V_l)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    us = markers(sys, N)
    V = us[0]
    for step, U in enumerate(us[1:], start=2):
        V = clopen.union(V, clopen.difference(U, _neighbourhood(V, N, cap), cap), cap)
        if debug:
            covered = clopen.union_all(us[:step], cap)
            ok = base_certificates(V, N, cap)["disjoint_shifts"] and clopen.difference(
                covered, _neighbourhood(V, N, cap), cap
            ).is_empty()
            if not ok:
                raise InvariantViolation(f"induction step {step} failed")
    certs = base_certificates(V, N, cap)
    if not all(certs.values()):
        raise InvariantViolation(f"base certificates failed: {certs}")
    return V


@dataclass(frozen=True, eq=False)
class Tower:
    sys: SystemDescriptor
    N: int
    base: ClopenSet
    roof_partition: dict[int, ClopenSet]
    coord_partition: dict[int, ClopenSet]
    marker_length: int
    certificates: dict[str, bool] = field(default_factory=dict)

    @property
    def heights(self) -> list[int]:
        return sorted(self.roof_partition)

    @property
    def span(self) -> tuple[int, int]:
        """Coordinate range [lo, hi) read by coordinate membership tests."""
        parts = list(self.coord_partition.values())
        return min(p.anchor for p in parts), max(p.stop for p in parts)

    def dump(self) -> str:
        lines = [f"# tower over {self.sys.describe()}", f"N {self.N}", f"marker_length {self.marker_length}"]
        for name, ok in sorted(self.certificates.items()):
            lines.append(f"certificate {name} {'pass' if ok else 'FAIL'}")
        lines.append("[base]")
        lines.append(self.base.dump())
        for k, part in sorted(self.roof_partition.items()):
            lines.append(f"[roof {k}]")
            lines.append(part.dump())
        for l, part in sorted(self.coord_partition.items()):
            lines.append(f"[coord {l}]")
            lines.append(part.dump())
        return "\n".join(lines) + "\n"


def roof_level(B: ClopenSet, k: int, cap: int = WINDOW_CAP) -> ClopenSet:
    """h^{-1}(k) = B & S^{-1}B^c & ... & S^{-(k-1)}B^c & S^{-k}B."""
    part = clopen.intersect(B, shift_set(B, -k), cap)
    for j in range(1, k):
        part = clopen.difference(part, shift_set(B, -j), cap)
        if part.is_empty():
            break
    return part


def coord_level(B: ClopenSet, l: int, cap: int = WINDOW_CAP) -> ClopenSet:
    """n^{-1}(l) = S^l B minus S^j B for j < l."""
    part = shift_set(B, l)
    for j in range(l):
        part = clopen.difference(part, shift_set(B, j), cap)
        if part.is_empty():
            break
    return part


def _pairwise_disjoint(parts, cap) -> bool:
    parts = list(parts)
    return all(
        clopen.intersect(parts[i], parts[j], cap).is_empty() for i in range(len(parts)) for j in range(i + 1, len(parts))
    )


def build_tower(sys: SystemDescriptor, N: int, cap: int = WINDOW_CAP, debug: bool = False) -> Tower:
    if N < 1:
        raise ValueError("N must be at least 1")
    B = build_base(sys, N, cap, debug)
    roofs = {}
    for k in range(1, 2 * N + 2):
        part = roof_level(B, k, cap)
        if not part.is_empty():
            roofs[k] = part
    coords = {l: coord_level(B, l, cap) for l in range(0, 2 * N + 1)}

    certs = base_certificates(B, N, cap)
    certs["roof_bounds"] = set(roofs) <= set(range(N + 1, 2 * N + 2))
    certs["roof_disjoint"] = _pairwise_disjoint(roofs.values(), cap)
    certs["roof_union_is_base"] = clopen.equal(clopen.union_all(roofs.values(), cap), B)
    certs["coord_disjoint"] = _pairwise_disjoint(coords.values(), cap)
    certs["coord_union_is_full"] = clopen.union_all(coords.values(), cap).is_full()
    certs["coord_zero_is_base"] = clopen.equal(coords[0], B)
    if not all(certs.values()):
        raise InvariantViolation(f"tower certificates failed: {certs}")
    log.debug("tower N=%d base window %d heights %s", N, B.length, sorted(roofs))
    return Tower(sys, N, B, roofs, coords, marker_window_length(sys, N), certs)


class TowerCoords(NamedTuple):
    height: int
    base_word: str
    level: int

    @property
    def base_class(self) -> tuple[int, str]:
        return self.height, self.base_word


def level_of(t: Tower, p: SymbolicPoint) -> int:
    for l, part in t.coord_partition.items():
        if clopen.member(part, p):
            return l
    raise InvariantViolation("point lies in no coordinate class")


def height_of(t: Tower, b: SymbolicPoint) -> tuple[int, str]:
    for k, part in t.roof_partition.items():
        w = clopen.matching_word(part, b)
        if w is not None:
            return k, w
    raise NotInBase("point is not in the base")


def tower_coords(t: Tower, p: SymbolicPoint) -> TowerCoords:
    """Coordinates (base class of S^-l p, l) with 0 <= l < h."""
    l = level_of(t, p)
    b = apply_shift(t.sys, p, -l)
    k, w = height_of(t, b)
    return TowerCoords(k, w, l)


def return_map(t: Tower, b: SymbolicPoint) -> SymbolicPoint:
    """T_B b = S^{h(b)} b."""
    if not clopen.member(t.base, b):
        raise NotInBase("return_map needs a base point")
    k, _ = height_of(t, b)
    return apply_shift(t.sys, b, k)


def inverse_return_map(t: Tower, b: SymbolicPoint) -> SymbolicPoint:
    """T_B^{-1} b = S^{-n} b with n the first l >= 1 such that S^{-l} b is in B."""
    if not clopen.member(t.base, b):
        raise NotInBase("inverse_return_map needs a base point")
    for n in range(1, 2 * t.N + 2):
        q = apply_shift(t.sys, b, -n)
        if clopen.member(t.base, q):
            return q
    raise InvariantViolation("no earlier base visit within 2N+1 steps")


def base_visits(t: Tower, p: SymbolicPoint, lo: int, hi: int) -> list[int]:
    """Times s in [lo, hi) with S^s p in B, read off p's window directly."""
    B = t.base
    need_lo, need_hi = lo + B.anchor, hi - 1 + B.stop
    if not p.covers(need_lo, need_hi):
        raise InsufficientWindow(f"base scan needs window [{need_lo}, {need_hi})")
    word, words, n = p.word, B.words, B.length
    off = B.anchor - p.start
    return [s for s in range(lo, hi) if word[s + off : s + off + n] in words]
