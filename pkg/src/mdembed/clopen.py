"""Exact Boolean and shift algebra of clopen subsets of a subshift.

A clopen set is stored as a finite union of cylinders
``[w]_o = {x : x_o ... x_{o+L-1} = w}`` over one common window ``[o, o+L)``.
Every result is trimmed to the smallest window it provably depends on, and
equality is decided after refining both operands to a common window.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

from .errors import BadWindow, MixedSystems, NotSymbolic, ResourceLimit
from .systems import SymbolicPoint, SystemDescriptor, admissible_words

WINDOW_CAP = 64


@dataclass(frozen=True, eq=False)
class ClopenSet:
    sys: SystemDescriptor
    anchor: int
    length: int
    words: frozenset

    def __eq__(self, other):
        if not isinstance(other, ClopenSet):
            return NotImplemented
        return equal(self, other)

    def __hash__(self):
        c = canonical(self)
        return hash((c.sys, c.anchor, c.length, c.words))

    def __or__(self, other):
        return union(self, other)

    def __and__(self, other):
        return intersect(self, other)

    def __sub__(self, other):
        return difference(self, other)

    def __invert__(self):
        return complement(self)

    def __contains__(self, p):
        return member(self, p)

    @property
    def stop(self) -> int:
        return self.anchor + self.length

    def is_empty(self) -> bool:
        return not self.words

    def is_full(self) -> bool:
        return self.words == admissible_words(self.sys, self.length)

    def dump(self) -> str:
        """One ``anchor:word`` line per cylinder, sorted."""
        return "\n".join(f"{self.anchor}:{w}" for w in sorted(self.words))

    def __repr__(self):
        return f"ClopenSet(anchor={self.anchor}, length={self.length}, words={len(self.words)})"


def _check_symbolic(sys):
    if not sys.symbolic:
        raise NotSymbolic("clopen sets live on subshifts only")


def cylinder(sys: SystemDescriptor, word: str, anchor: int = 0) -> ClopenSet:
    _check_symbolic(sys)
    words = frozenset([word]) & admissible_words(sys, len(word))
    return canonical(ClopenSet(sys, anchor, len(word), words))


def from_words(sys: SystemDescriptor, words, anchor: int = 0) -> ClopenSet:
    words = frozenset(words)
    lengths = {len(w) for w in words}
    if len(lengths) > 1:
        raise BadWindow("all words must share one length")
    length = lengths.pop() if lengths else 1
    return canonical(ClopenSet(sys, anchor, length, words & admissible_words(sys, length)))


def full(sys: SystemDescriptor) -> ClopenSet:
    _check_symbolic(sys)
    return ClopenSet(sys, 0, 1, admissible_words(sys, 1))


def empty(sys: SystemDescriptor) -> ClopenSet:
    _check_symbolic(sys)
    return ClopenSet(sys, 0, 1, frozenset())


@lru_cache(maxsize=None)
def _edge_counts(sys: SystemDescriptor, length: int) -> tuple[Counter, Counter]:
    lang = admissible_words(sys, length)
    return Counter(w[:-1] for w in lang), Counter(w[1:] for w in lang)


def canonical(a: ClopenSet) -> ClopenSet:
    """Drop boundary coordinates the set does not depend on."""
    if not a.words:
        return ClopenSet(a.sys, 0, 1, frozenset())
    anchor, length, words = a.anchor, a.length, a.words
    while length > 1:
        by_prefix, by_suffix = _edge_counts(a.sys, length)
        heads = Counter(w[:-1] for w in words)
        if all(by_prefix[p] == c for p, c in heads.items()):
            words = frozenset(heads)
            length -= 1
            continue
        tails = Counter(w[1:] for w in words)
        if all(by_suffix[s] == c for s, c in tails.items()):
            words = frozenset(tails)
            anchor += 1
            length -= 1
            continue
        break
    return ClopenSet(a.sys, anchor, length, words)


def refine(a: ClopenSet, anchor: int, length: int, cap: int = WINDOW_CAP) -> ClopenSet:
    """The same set written over the larger window ``[anchor, anchor+length)``."""
    if not (anchor <= a.anchor and a.stop <= anchor + length):
        raise BadWindow(f"[{anchor}, {anchor + length}) does not contain [{a.anchor}, {a.stop})")
    if length > cap:
        raise ResourceLimit(f"window length {length} exceeds cap {cap}")
    if anchor == a.anchor and length == a.length:
        return a
    off = a.anchor - anchor
    lang = admissible_words(a.sys, length)
    words = frozenset(v for v in lang if v[off : off + a.length] in a.words)
    return ClopenSet(a.sys, anchor, length, words)


def _common(a: ClopenSet, b: ClopenSet, cap: int):
    if a.sys != b.sys:
        raise MixedSystems("operands live on different systems")
    if a.is_empty() or b.is_empty():
        # the empty set refines to any window trivially
        lo = a.anchor if b.is_empty() else b.anchor
        hi = a.stop if b.is_empty() else b.stop
    else:
        lo, hi = min(a.anchor, b.anchor), max(a.stop, b.stop)
    ra = ClopenSet(a.sys, lo, hi - lo, frozenset()) if a.is_empty() else refine(a, lo, hi - lo, cap)
    rb = ClopenSet(b.sys, lo, hi - lo, frozenset()) if b.is_empty() else refine(b, lo, hi - lo, cap)
    return ra, rb


def union(a: ClopenSet, b: ClopenSet, cap: int = WINDOW_CAP) -> ClopenSet:
    ra, rb = _common(a, b, cap)
    return canonical(ClopenSet(a.sys, ra.anchor, ra.length, ra.words | rb.words))


def intersect(a: ClopenSet, b: ClopenSet, cap: int = WINDOW_CAP) -> ClopenSet:
    if a.is_empty() or b.is_empty():
        return empty(a.sys)
    ra, rb = _common(a, b, cap)
    return canonical(ClopenSet(a.sys, ra.anchor, ra.length, ra.words & rb.words))


def difference(a: ClopenSet, b: ClopenSet, cap: int = WINDOW_CAP) -> ClopenSet:
    if a.is_empty() or b.is_empty():
        return canonical(a)
    ra, rb = _common(a, b, cap)
    return canonical(ClopenSet(a.sys, ra.anchor, ra.length, ra.words - rb.words))


def complement(a: ClopenSet) -> ClopenSet:
    if a.is_empty():
        return full(a.sys)
    lang = admissible_words(a.sys, a.length)
    return canonical(ClopenSet(a.sys, a.anchor, a.length, lang - a.words))


def union_all(sets, cap: int = WINDOW_CAP) -> ClopenSet:
    sets = list(sets)
    result = empty(sets[0].sys)
    for s in sets:
        result = union(result, s, cap)
    return result


def shift_set(a: ClopenSet, k: int) -> ClopenSet:
    """S^k a = {x : S^-k x in a}: the same words re-anchored at o - k."""
    if a.is_empty():
        return a
    return ClopenSet(a.sys, a.anchor - k, a.length, a.words)


def equal(a: ClopenSet, b: ClopenSet, cap: int = 4 * WINDOW_CAP) -> bool:
    if a.sys != b.sys:
        return False
    if a.is_empty() or b.is_empty():
        return a.is_empty() and b.is_empty()
    ra, rb = _common(a, b, cap)
    return ra.words == rb.words


def member(a: ClopenSet, p: SymbolicPoint) -> bool:
    """Whether ``p`` lies in ``a``; p's window must cover a's window."""
    if a.is_empty():
        return False
    return p.segment(a.anchor, a.length) in a.words


def matching_word(a: ClopenSet, p: SymbolicPoint) -> str | None:
    w = p.segment(a.anchor, a.length)
    return w if w in a.words else None
