"""Finitely described dynamical systems and their points.

Three families are supported: subshifts (full shifts, shifts of finite type
and primitive substitution subshifts), rotations of the circle by a
fixed-point angle, and products of two such systems.  Points of the infinite
sequence spaces are finite windows that are known to extend to a bi-infinite
admissible sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product as cartesian
from typing import Union

import numpy as np

from .errors import InsufficientWindow, InvalidSystem, NotSymbolic, ResourceLimit

SYMBOLS = "0123456789abcdefghijklmnopqrstuvwxyz"

DEFAULT_ITERATION_CAP = 10_000
DEFAULT_LENGTH_CAP = 64
DEFAULT_PERIOD_HORIZON = 10**6
MAX_WORDS = 2_000_000


@dataclass(frozen=True)
class SystemDescriptor:
    """An immutable description of a Z-action.

    Use the module-level constructors (:func:`full_shift`, :func:`sft`,
    :func:`substitution`, :func:`rotation`, :func:`product`) rather than
    building instances by hand.
    """

    kind: str
    alphabet_size: int = 0
    forbidden: tuple[str, ...] = ()
    rules: tuple[tuple[str, str], ...] = ()
    alpha: int = 0
    bits: int = 0
    left: SystemDescriptor | None = None
    right: SystemDescriptor | None = None
    period_horizon: int = DEFAULT_PERIOD_HORIZON

    def __post_init__(self):
        validators = {
            "full_shift": self._check_shift,
            "sft": self._check_sft,
            "substitution": self._check_substitution,
            "rotation": self._check_rotation,
            "product": self._check_product,
        }
        if self.kind not in validators:
            raise InvalidSystem(f"unknown system kind {self.kind!r}")
        validators[self.kind]()

    def _check_shift(self):
        if not 1 <= self.alphabet_size <= len(SYMBOLS):
            raise InvalidSystem(f"alphabet_size must be in [1, {len(SYMBOLS)}]")

    def _check_sft(self):
        self._check_shift()
        alphabet = set(self.alphabet)
        for w in self.forbidden:
            if not w or not set(w) <= alphabet:
                raise InvalidSystem(f"forbidden word {w!r} is empty or uses foreign symbols")

    def _check_substitution(self):
        if not self.rules:
            raise InvalidSystem("substitution needs at least one rule")
        letters = {a for a, _ in self.rules}
        if len(letters) != len(self.rules):
            raise InvalidSystem("duplicate substitution rule")
        for a, image in self.rules:
            if len(a) != 1:
                raise InvalidSystem(f"rule key {a!r} is not a single symbol")
            if not image or not set(image) <= letters:
                raise InvalidSystem(f"image of {a!r} is empty or uses unknown symbols")
        if not is_primitive(self.rules):
            raise InvalidSystem("substitution is not primitive")

    def _check_rotation(self):
        if self.bits < 64:
            raise InvalidSystem("rotation angles need at least 64 fractional bits")
        if not 0 < self.alpha < (1 << self.bits):
            raise InvalidSystem("alpha must lie strictly inside (0, 1)")
        if rotation_period(self) <= self.period_horizon:
            raise InvalidSystem(
                f"alpha has period {rotation_period(self)} <= {self.period_horizon} at working precision"
            )

    def _check_product(self):
        if self.left is None or self.right is None:
            raise InvalidSystem("product needs two factors")

    @property
    def symbolic(self) -> bool:
        return self.kind in ("full_shift", "sft", "substitution")

    @property
    def alphabet(self) -> str:
        if self.kind == "substitution":
            return "".join(sorted(a for a, _ in self.rules))
        if self.kind in ("full_shift", "sft"):
            return SYMBOLS[: self.alphabet_size]
        raise NotSymbolic(f"{self.kind} has no alphabet")

    @property
    def rule_map(self) -> dict[str, str]:
        return dict(self.rules)

    @property
    def alpha_float(self) -> float:
        return self.alpha / (1 << self.bits)

    def describe(self) -> str:
        if self.kind == "full_shift":
            return f"full_shift(l={self.alphabet_size})"
        if self.kind == "sft":
            return f"sft(l={self.alphabet_size}, forbidden={list(self.forbidden)})"
        if self.kind == "substitution":
            return "substitution(" + ", ".join(f"{a}->{b}" for a, b in self.rules) + ")"
        if self.kind == "rotation":
            return f"rotation(alpha={self.alpha}/2^{self.bits})"
        return f"product({self.left.describe()}, {self.right.describe()})"


def full_shift(alphabet_size: int) -> SystemDescriptor:
    return SystemDescriptor("full_shift", alphabet_size=alphabet_size)


def sft(alphabet_size: int, forbidden) -> SystemDescriptor:
    return SystemDescriptor("sft", alphabet_size=alphabet_size, forbidden=tuple(sorted(set(forbidden))))


def substitution(rules: dict[str, str]) -> SystemDescriptor:
    return SystemDescriptor("substitution", rules=tuple(sorted(rules.items())))


def fibonacci() -> SystemDescriptor:
    return substitution({"0": "01", "1": "0"})


def rotation(alpha, bits: int = 64, period_horizon: int = DEFAULT_PERIOD_HORIZON) -> SystemDescriptor:
    """Rotation by ``alpha``, given as a float/Fraction in (0,1) or as an
    integer numerator over ``2**bits``."""
    if isinstance(alpha, int):
        num = alpha
    else:
        num = int(alpha * (1 << bits))
        num |= 1  # odd numerators have maximal period 2**bits
    return SystemDescriptor("rotation", alpha=num, bits=bits, period_horizon=period_horizon)


def golden_rotation(bits: int = 64) -> SystemDescriptor:
    """Rotation by a fixed-point approximation of sqrt(2) - 1."""
    scale = 1 << bits
    num = math.isqrt(2 * scale * scale) - scale
    return rotation(num | 1, bits)


def product(left: SystemDescriptor, right: SystemDescriptor) -> SystemDescriptor:
    return SystemDescriptor("product", left=left, right=right)


def rotation_period(sys: SystemDescriptor) -> int:
    """Exact period of the fixed-point rotation: 2**bits / gcd(alpha, 2**bits)."""
    modulus = 1 << sys.bits
    return modulus // math.gcd(sys.alpha, modulus)


def is_primitive(rules) -> bool:
    rules = dict(rules)
    letters = sorted(rules)
    index = {a: i for i, a in enumerate(letters)}
    d = len(letters)
    m = np.zeros((d, d), dtype=np.int64)
    for a, image in rules.items():
        for b in image:
            m[index[b], index[a]] += 1
    power = (m > 0).astype(np.int64)
    step = power.copy()
    # Wielandt: a primitive d x d matrix has a positive power at most (d-1)^2 + 1
    for _ in range((d - 1) ** 2 + 1):
        if (power > 0).all():
            return True
        power = ((power @ step) > 0).astype(np.int64)
    return bool((power > 0).all())


def substitute(rules: dict[str, str], word: str) -> str:
    return "".join(rules[c] for c in word)


def _require_symbolic(sys: SystemDescriptor):
    if not sys.symbolic:
        raise NotSymbolic(f"{sys.describe()} is not a subshift")


def _factors(word: str, n: int) -> set[str]:
    return {word[i : i + n] for i in range(len(word) - n + 1)}


def has_forbidden(word: str, forbidden) -> bool:
    return any(f in word for f in forbidden)


@lru_cache(maxsize=None)
def _sft_graph(sys: SystemDescriptor) -> tuple[int, dict[str, tuple[str, ...]]]:
    """Essential block graph: vertices are k-blocks lying on bi-infinite paths."""
    k = max([1] + [len(f) - 1 for f in sys.forbidden])
    if sys.alphabet_size**k > MAX_WORDS:
        raise ResourceLimit("SFT block graph too large")
    vertices = {"".join(t) for t in cartesian(sys.alphabet, repeat=k)}
    vertices = {v for v in vertices if not has_forbidden(v, sys.forbidden)}
    succ = {
        v: {v[1:] + a for a in sys.alphabet if v[1:] + a in vertices and not has_forbidden(v + a, sys.forbidden)}
        for v in vertices
    }
    changed = True
    while changed:
        has_pred = {w for v in vertices for w in succ[v]}
        keep = {v for v in vertices if succ[v] & vertices and v in has_pred}
        changed = keep != vertices
        vertices = keep
        succ = {v: succ[v] & vertices for v in vertices}
    return k, {v: tuple(sorted(succ[v])) for v in sorted(vertices)}


@lru_cache(maxsize=None)
def _substitution_words(sys: SystemDescriptor, n: int, cap: int) -> frozenset[str]:
    # Least set containing the length-n factors of some sigma^j(a) and closed
    # under u -> length-n factors of sigma(u); this equals the language.
    rules = sys.rule_map
    w = sys.alphabet[0]
    rounds = 0
    while len(w) < n:
        w = substitute(rules, w)
        rounds += 1
        if rounds > cap:
            raise ResourceLimit("substitution does not grow")
    words = _factors(w, n)
    frontier = set(words)
    while frontier:
        rounds += 1
        if rounds > cap:
            raise ResourceLimit(f"word set of length {n} did not stabilize within {cap} rounds")
        fresh = set()
        for u in frontier:
            fresh |= _factors(substitute(rules, u), n) - words
        words |= fresh
        frontier = fresh
        if len(words) > MAX_WORDS:
            raise ResourceLimit("too many admissible words")
    return frozenset(words)


@lru_cache(maxsize=None)
def _admissible(sys: SystemDescriptor, n: int, cap: int) -> frozenset[str]:
    if sys.kind == "full_shift":
        if sys.alphabet_size**n > MAX_WORDS:
            raise ResourceLimit(f"{sys.alphabet_size}^{n} words exceed the enumeration cap")
        return frozenset("".join(t) for t in cartesian(sys.alphabet, repeat=n))
    if sys.kind == "substitution":
        return _substitution_words(sys, n, cap)
    k, succ = _sft_graph(sys)
    if n <= k:
        return frozenset(v[:n] for v in succ)
    words = set(succ)
    for _ in range(n - k):
        words = {w + t[-1] for w in words for t in succ[w[-k:]]}
        if len(words) > MAX_WORDS:
            raise ResourceLimit("too many admissible words")
    return frozenset(words)


def admissible_words(sys: SystemDescriptor, n: int, cap: int = DEFAULT_ITERATION_CAP) -> frozenset[str]:
    """The length-``n`` words occurring in some point of the subshift."""
    _require_symbolic(sys)
    if n < 1:
        raise ValueError("word length must be positive")
    return _admissible(sys, n, cap)


def is_admissible(sys: SystemDescriptor, word: str) -> bool:
    return word in admissible_words(sys, len(word))


def word_period(word: str, bound: int) -> int:
    """Smallest p <= bound with word[i] == word[i+p] for all valid i (p >= len
    counts as a vacuous period); 0 if there is none."""
    for p in range(1, bound + 1):
        if p >= len(word) or word[:-p] == word[p:]:
            return p
    return 0


@dataclass(frozen=True)
class AperiodicityCertificate:
    system: str
    N: int
    aperiodic: bool
    witness_length: int | None = None
    periodic_block: str | None = None

    def as_dict(self) -> dict:
        return {
            "system": self.system,
            "N": self.N,
            "aperiodic_up_to_N": self.aperiodic,
            "witness_length": self.witness_length,
            "periodic_block": self.periodic_block,
        }


def certify_aperiodic(sys: SystemDescriptor, N: int, cap: int = DEFAULT_LENGTH_CAP) -> AperiodicityCertificate:
    """Decide whether the subshift has a periodic point of period <= N.

    When it has none, the witness is the least L such that no admissible word
    of length L has a period <= N.  Otherwise the witness is a block u with
    u^infinity in the subshift.
    """
    _require_symbolic(sys)
    if N < 1:
        raise ValueError("N must be positive")
    name = sys.describe()
    local = max([1] + [len(f) for f in sys.forbidden])
    prev_count = None
    for L in range(1, cap + 1):
        words = sorted(admissible_words(sys, L))
        periodic = [w for w in words if word_period(w, N)]
        if not periodic:
            return AperiodicityCertificate(name, N, True, witness_length=L)
        if sys.kind != "substitution":
            # a p-periodic word of length >= p + local - 1 contains every
            # local window of its periodic extension
            if L > N and L >= N + local - 1:
                w = periodic[0]
                return AperiodicityCertificate(name, N, False, periodic_block=w[: word_period(w, N)])
        elif prev_count is not None and prev_count == len(words):
            # complexity stalled: the minimal subshift is one periodic orbit
            q = prev_count
            if q <= N:
                block = sorted(admissible_words(sys, 2 * q))[0][:q]
                return AperiodicityCertificate(name, N, False, periodic_block=block)
        prev_count = len(words)
    raise ResourceLimit(f"aperiodicity scan for N={N} unresolved at word length {cap}")


def rotation_certificate(sys: SystemDescriptor, n_max: int | None = None) -> dict:
    n_max = sys.period_horizon if n_max is None else n_max
    period = rotation_period(sys)
    return {"system": sys.describe(), "period": period, "n_max": n_max, "aperiodic_up_to_n_max": period > n_max}


# ---------------------------------------------------------------------------
# Points


@dataclass(frozen=True)
class SymbolicPoint:
    """Window ``word`` placed so that ``word[0]`` sits at coordinate ``start``."""

    start: int
    word: str
    extender: str = "language"

    def __post_init__(self):
        if not self.start <= 0 < self.start + len(self.word):
            raise InsufficientWindow("window must cover coordinate 0")

    @property
    def stop(self) -> int:
        return self.start + len(self.word)

    @property
    def radius(self) -> int:
        return min(-self.start, self.stop - 1)

    def covers(self, lo: int, hi: int) -> bool:
        return self.start <= lo and hi <= self.stop

    def segment(self, lo: int, length: int) -> str:
        """Symbols at coordinates lo, ..., lo + length - 1."""
        if not self.covers(lo, lo + length):
            raise InsufficientWindow(f"window [{self.start}, {self.stop}) does not cover [{lo}, {lo + length})")
        return self.word[lo - self.start : lo - self.start + length]

    def symbol(self, i: int) -> str:
        return self.segment(i, 1)

    def centered(self, radius: int) -> str:
        return self.segment(-radius, 2 * radius + 1)


@dataclass(frozen=True)
class AnglePoint:
    """Angle ``angle / 2**bits`` on the circle R/Z."""

    angle: int
    bits: int

    @property
    def value(self) -> float:
        return self.angle / (1 << self.bits)


@dataclass(frozen=True)
class PairPoint:
    left: "Point"
    right: "Point"


Point = Union[SymbolicPoint, AnglePoint, PairPoint]


def make_point(sys: SystemDescriptor, word: str, start: int | None = None) -> SymbolicPoint:
    """Point whose window is ``word``; centred at 0 unless ``start`` is given."""
    _require_symbolic(sys)
    if start is None:
        start = -(len(word) // 2)
    if not is_admissible(sys, word):
        raise InvalidSystem(f"window {word!r} is not admissible for {sys.describe()}")
    return SymbolicPoint(start, word, _extender_tag(sys))


def _extender_tag(sys: SystemDescriptor) -> str:
    return {"full_shift": "free", "sft": "essential-graph", "substitution": "language"}[sys.kind]


def apply_shift(sys: SystemDescriptor, p: Point, k: int) -> Point:
    """T^k p.  Symbolic windows are re-anchored; the origin must stay inside."""
    if sys.kind == "rotation":
        return AnglePoint((p.angle + k * sys.alpha) % (1 << sys.bits), sys.bits)
    if sys.kind == "product":
        return PairPoint(apply_shift(sys.left, p.left, k), apply_shift(sys.right, p.right, k))
    # (S^k x)_n = x_{n+k}
    if not p.start - k <= 0 < p.stop - k:
        raise InsufficientWindow(f"shift by {k} leaves window [{p.start}, {p.stop})")
    return SymbolicPoint(p.start - k, p.word, p.extender)


def random_bits(rng: np.random.Generator, bits: int) -> int:
    chunks = rng.integers(0, 1 << 32, size=(bits + 31) // 32, dtype=np.uint64)
    value = 0
    for c in chunks:
        value = (value << 32) | int(c)
    return value & ((1 << bits) - 1)


@lru_cache(maxsize=None)
def long_word(sys: SystemDescriptor, length: int) -> str:
    """A prefix of sigma^j(a) of at least ``length`` symbols."""
    rules = sys.rule_map
    w = sys.alphabet[0]
    for _ in range(DEFAULT_ITERATION_CAP):
        if len(w) >= length:
            return w
        w = substitute(rules, w)
    raise ResourceLimit("substitution does not grow")


def _sample_symbolic(sys: SystemDescriptor, rng: np.random.Generator, radius: int) -> SymbolicPoint:
    width = 2 * radius + 1
    if sys.kind == "full_shift":
        idx = rng.integers(0, sys.alphabet_size, size=width)
        word = "".join(sys.alphabet[i] for i in idx)
    elif sys.kind == "sft":
        k, succ = _sft_graph(sys)
        if not succ:
            raise InvalidSystem("SFT is empty")
        vertices = list(succ)
        v = vertices[rng.integers(len(vertices))]
        chars = list(v)
        while len(chars) < width:
            options = succ[v]
            v = options[rng.integers(len(options))]
            chars.append(v[-1])
        word = "".join(chars[:width])
    else:
        text = long_word(sys, max(1 << 15, 16 * width))
        i = int(rng.integers(0, len(text) - width + 1))
        word = text[i : i + width]
    return SymbolicPoint(-radius, word, _extender_tag(sys))


def _sample_one(sys: SystemDescriptor, rng: np.random.Generator, radius: int) -> Point:
    if sys.kind == "rotation":
        return AnglePoint(random_bits(rng, sys.bits), sys.bits)
    if sys.kind == "product":
        return PairPoint(_sample_one(sys.left, rng, radius), _sample_one(sys.right, rng, radius))
    return _sample_symbolic(sys, rng, radius)


def sample_points(sys: SystemDescriptor, count: int, window_radius: int = 16, seed: int = 0) -> list[Point]:
    """Deterministic-for-seed admissible points with windows [-r, r]."""
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    return [_sample_one(sys, rng, window_radius) for _ in range(count)]


def project(p: Point, side: str = "right") -> Point:
    """Coordinate projection of a product point."""
    return p.right if side == "right" else p.left
