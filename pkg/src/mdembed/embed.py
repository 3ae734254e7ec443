"""Embedding constructions.

* :func:`perturb_to_embedding` perturbs a map ``f: X -> [0,1]^M`` into an
  epsilon-embedding ``g = sum_i phi_i u_i`` built from a cover of small order
  and vertices ``u_i`` in general position.
* :func:`tower_embed` assembles ``g: X -> [0,1]^D`` level by level over a
  Kakutani-Rokhlin tower of the symbolic factor, so that ``x -> (I_g(x),
  pi(x))`` separates every pair of points at distance >= eta.
* :func:`interval_code`, :func:`slab_embed` and :func:`final_embed` turn the
  pair ``(I_g, pi)`` into a single equivariant map into ``([0,1]^D)^Z``.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from . import clopen
from .errors import (
    BadEpsilon,
    DimensionTooSmall,
    InsufficientWindow,
    InvariantViolation,
    ModulusViolated,
    OrderTooLarge,
    RetriesExhausted,
    VerificationFailed,
    WidimGateFailed,
)
from .geometry import Cover, Metric, distance, metric_for, widim_upper
from .systems import (
    AnglePoint,
    PairPoint,
    SymbolicPoint,
    SystemDescriptor,
    apply_shift,
    random_bits,
    sample_points,
)
from .towers import Tower, base_visits, build_tower, height_of, tower_coords

GP_MARGIN = 1e-9
S_INFLATION = 1.25
EPS_FACTOR = 0.9


# ---------------------------------------------------------------------------
# Maps


class MapTable:
    """A map from points of ``domain`` into ``[0,1]^dim``."""

    dim: int
    domain: SystemDescriptor | None = None
    lipschitz: float | None = None

    def __call__(self, p) -> np.ndarray:
        raise NotImplementedError


class CircleSeedMap(MapTable):
    """Coordinates ``c_j + a_j cos(2 pi (n_j x - phi_j))`` of the circle
    coordinate ``x`` (the left factor for product points).

    The Lipschitz constant with respect to arc length is ``max 2 pi a_j n_j``.
    """

    def __init__(self, centers, amplitudes, freqs=None, phases=None, domain=None):
        self.centers = np.asarray(centers, dtype=float)
        self.amplitudes = np.asarray(amplitudes, dtype=float)
        self.dim = len(self.centers)
        self.freqs = np.ones(self.dim) if freqs is None else np.asarray(freqs, dtype=float)
        self.phases = np.zeros(self.dim) if phases is None else np.asarray(phases, dtype=float)
        lo = self.centers - np.abs(self.amplitudes)
        hi = self.centers + np.abs(self.amplitudes)
        if (lo < 0).any() or (hi > 1).any():
            raise ValueError("seed map leaves the unit cube")
        self.lipschitz = float(np.max(2 * math.pi * np.abs(self.amplitudes * self.freqs)))
        self.domain = domain

    def __call__(self, p) -> np.ndarray:
        while isinstance(p, PairPoint):
            p = p.left
        return self.centers + self.amplitudes * np.cos(2 * math.pi * (self.freqs * p.value - self.phases))

    def describe(self) -> str:
        return f"circle-seed(dim={self.dim}, lipschitz={self.lipschitz:.6f})"


def circle_seed(D: int = 1, domain=None) -> CircleSeedMap:
    """``(1 + cos 2 pi (x - j/(2D)))/2`` per coordinate; Lipschitz pi."""
    return CircleSeedMap([0.5] * D, [0.5] * D, phases=[j / (2 * D) for j in range(D)], domain=domain)


def planar_circle_seed(radius: float = 0.15) -> CircleSeedMap:
    """``(1/2 + r cos 2 pi x, 1/2 + r sin 2 pi x, 0)`` in [0,1]^3."""
    return CircleSeedMap([0.5, 0.5, 0.0], [radius, radius, 0.0], phases=[0.0, 0.25, 0.0])


class OrbitBlockMap(MapTable):
    """x -> (f(x), f(Tx), ..., f(T^{k-1} x)) in [0,1]^{kD}."""

    def __init__(self, f: MapTable, sys: SystemDescriptor, k: int):
        self.f, self.sys, self.k = f, sys, k
        self.dim = k * f.dim
        self.domain = sys
        # the block is Lipschitz for d_0^{k-1} with f's constant
        self.lipschitz = f.lipschitz

    def __call__(self, p) -> np.ndarray:
        return np.concatenate([self.f(apply_shift(self.sys, p, i)) for i in range(self.k)])


@dataclass
class GeneralPositionCertificate:
    vertices: np.ndarray
    a: int
    margin: float
    subset_size: int
    subsets_checked: int
    attempts: int
    min_singular_bound: float

    @property
    def M(self) -> int:
        return self.vertices.shape[1]

    def as_dict(self) -> dict:
        return {
            "count": int(self.vertices.shape[0]),
            "M": self.M,
            "order": self.a,
            "margin": self.margin,
            "subset_size": self.subset_size,
            "subsets_checked": self.subsets_checked,
            "attempts": self.attempts,
            "min_singular_lower_bound": self.min_singular_bound,
        }


class PouMap(MapTable):
    """g(x) = sum_i phi_i(x) u_i for the cover's partition of unity."""

    def __init__(self, cover: Cover, certificate: GeneralPositionCertificate, domain=None):
        self.cover = cover
        self.certificate = certificate
        self.vertices = certificate.vertices
        self.dim = self.vertices.shape[1]
        self.domain = domain

    def __call__(self, p) -> np.ndarray:
        act = self.cover.active(p)
        if not act:
            raise InvariantViolation("point lies outside every cover region")
        u = self.vertices
        i, w = act[0]
        out = w * u[i]
        for i, w in act[1:]:
            out += w * u[i]
        return out


# ---------------------------------------------------------------------------
# General position


def _subset_blocks(n: int, s: int):
    """All s-subsets of range(n) as index arrays, grouped by first element."""
    if s == 1:
        for i in range(n):
            yield np.array([[i]])
        return
    rest = np.array(list(combinations(range(n), s - 1)), dtype=np.int64).reshape(-1, s - 1)
    # rows are lexicographic, so rows with min > i form a suffix
    firsts = rest[:, 0] if len(rest) else np.array([], dtype=np.int64)
    for i in range(n):
        start = np.searchsorted(firsts, i + 1)
        block = rest[start:]
        if len(block):
            yield np.column_stack([np.full(len(block), i), block])


def affine_independence_bound(points: np.ndarray) -> float:
    """Certified lower bound on the least singular value of the difference
    matrix of ``points`` (rows); 0 means possibly dependent."""
    return _batched_bound(points[None, :, :])[0]


def _batched_bound(pts: np.ndarray) -> np.ndarray:
    # pts: (batch, s, M).  sigma_min^2 >= det(G) / tr(G)^(s-2) for G = V V^T
    diffs = pts[:, 1:, :] - pts[:, :1, :]
    s1 = diffs.shape[1]
    if s1 == 0:
        return np.full(len(pts), np.inf)
    gram = diffs @ diffs.transpose(0, 2, 1)
    det = np.linalg.det(gram)
    tr = np.trace(gram, axis1=1, axis2=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(det > 0, det / np.maximum(tr, 1e-300) ** (s1 - 1), 0.0)
    return np.sqrt(np.maximum(lam, 0.0))


def check_general_position(vertices: np.ndarray, a: int, margin: float = GP_MARGIN):
    """Check every subset of size min(2a+2, N) for affine independence.

    Two affine combinations supported on J and K with |J|, |K| <= a+1 can only
    coincide nontrivially if J | K is affinely dependent, so this covers all
    pairs (J, K).  Returns (first failing subset or None, subsets checked,
    smallest bound seen).
    """
    n = len(vertices)
    s = min(2 * a + 2, n)
    checked = 0
    worst = math.inf
    for block in _subset_blocks(n, s):
        for lo in range(0, len(block), 200_000):
            chunk = block[lo : lo + 200_000]
            bounds = _batched_bound(vertices[chunk])
            checked += len(chunk)
            worst = min(worst, float(bounds.min()))
            bad = np.nonzero(bounds < margin)[0]
            if len(bad):
                return tuple(int(i) for i in chunk[bad[0]]), checked, worst
    return None, checked, worst


def general_position_vertices(M: int, count: int, a: int, anchors, radius: float, seed: int,
                              margin: float = GP_MARGIN, retries: int = 25) -> GeneralPositionCertificate:
    """Vertices u_i with ||u_i - anchor_i||_inf < radius, u_i in [0,1]^M, in
    general position for combinations of at most a+1 vertices."""
    if 2 * a >= M:
        raise DimensionTooSmall(f"need 2a < M, got a={a}, M={M}")
    if radius <= 0:
        raise ValueError("radius must be positive")
    anchors = np.asarray(anchors, dtype=float).reshape(count, M)
    rng = np.random.default_rng(seed)
    r = radius * (1 - 1e-6)
    lo = np.clip(anchors - r, 0.0, 1.0)
    hi = np.clip(anchors + r, 0.0, 1.0)
    bad = None
    for attempt in range(1, retries + 1):
        u = lo + (hi - lo) * rng.random((count, M))
        bad, checked, worst = check_general_position(u, a, margin)
        if bad is None:
            return GeneralPositionCertificate(u, a, margin, min(2 * a + 2, count), checked, attempt, worst)
    raise RetriesExhausted(f"no general-position sample in {retries} attempts", subset=bad)


# ---------------------------------------------------------------------------
# Perturbation to an epsilon-embedding


@dataclass
class PerturbationReport:
    order: int
    mesh: float
    epsilon: float
    delta: float
    lipschitz: float
    s_sampled: float
    s_used: float
    vertex_radius: float
    sup_deviation: float
    certificate: GeneralPositionCertificate
    separation: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "mesh": self.mesh,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "lipschitz": self.lipschitz,
            "modulus_bound": self.lipschitz * self.epsilon,
            "s_sampled": self.s_sampled,
            "s_used": self.s_used,
            "vertex_radius": self.vertex_radius,
            "sup_deviation": self.sup_deviation,
            "general_position": self.certificate.as_dict(),
            "separation": self.separation,
        }


def modulus_gate(f: MapTable, epsilon: float, delta: float):
    if f.lipschitz is None:
        raise ModulusViolated("map has no Lipschitz certificate")
    if not f.lipschitz * epsilon < delta:
        raise ModulusViolated(f"lipschitz {f.lipschitz:.6g} * eps {epsilon:.6g} >= delta {delta:.6g}")


def _support_spread(f: MapTable, cover: Cover, anchors: np.ndarray, sample) -> float:
    s = 0.0
    for p in sample:
        fp = f(p)
        for i, w in cover.active(p):
            s = max(s, float(np.max(np.abs(fp - anchors[i]))))
    return s


def perturb_to_embedding(f: MapTable, cover: Cover, delta: float, epsilon: float, sample, seed: int,
                         margin: float = GP_MARGIN) -> tuple[PouMap, PerturbationReport]:
    """Replace ``f`` by ``g = sum phi_i u_i`` with ``sup ||f - g|| < delta``
    whose fibres lie inside single cover regions (hence have diameter < eps)."""
    if not cover.mesh < epsilon:
        raise BadEpsilon(f"cover mesh {cover.mesh} is not below epsilon {epsilon}")
    modulus_gate(f, epsilon, delta)
    M, a = f.dim, cover.order
    if not 2 * a < M:
        raise OrderTooLarge(f"cover order {a} needs 2a < M = {M}")
    reps = [cover.representative(i) for i in range(len(cover))]
    anchors = np.array([f(x) for x in reps])
    s_sampled = _support_spread(f, cover, anchors, sample)
    s_used = S_INFLATION * s_sampled
    if delta - s_used <= 0:
        raise ModulusViolated(f"support spread {s_used:.6g} leaves no room below delta {delta:.6g}")
    cert = general_position_vertices(M, len(cover), a, anchors, delta - s_used, seed, margin)
    g = PouMap(cover, cert, f.domain)
    dev = max(float(np.max(np.abs(g(p) - f(p)))) for p in sample)
    report = PerturbationReport(a, cover.mesh, epsilon, delta, f.lipschitz, s_sampled, s_used,
                                delta - s_used, dev, cert)
    if not dev < delta:
        raise VerificationFailed(f"sampled deviation {dev} >= delta {delta}")
    return g, report


def verify_epsilon_embedding(g: MapTable, metric: Metric, points, epsilon: float, pair_count: int,
                             seed: int, max_draws: int | None = None) -> dict:
    """Sample index pairs; for those with certified distance >= eps require
    g(x) != g(y).  Also replay the fibre argument on near-collisions."""
    rng = np.random.default_rng(seed)
    n = len(points)
    images = [g(p) for p in points]
    max_draws = max_draws or 50 * pair_count
    kept = violations = near = 0
    min_sep = math.inf
    draws = 0
    while kept < pair_count and draws < max_draws:
        draws += 1
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        d = distance(metric, points[i], points[j])
        sep = float(np.max(np.abs(images[i] - images[j])))
        if sep <= 1e-9 and hasattr(g, "cover"):
            near += 1
            # a near-collision must come from a shared region
            shared = {k for k, _ in g.cover.active(points[i])} & {k for k, _ in g.cover.active(points[j])}
            if not shared:
                violations += 1
        if d.lower < epsilon:
            continue
        kept += 1
        min_sep = min(min_sep, sep)
        if sep == 0.0:
            violations += 1
    return {
        "pairs": kept,
        "epsilon": epsilon,
        "min_separation": min_sep,
        "near_collisions": near,
        "violations": violations,
    }


# ---------------------------------------------------------------------------
# Tower assembly


def choose_epsilon(eta: float, delta: float, lipschitz: float) -> float:
    return min(eta * EPS_FACTOR, delta / lipschitz * EPS_FACTOR)


def widim_gate(X: SystemDescriptor, D: int, epsilon: float, ks) -> dict[int, int]:
    """widim bound for each horizon k; raises unless 2 * bound < k * D."""
    bounds = {}
    for k in ks:
        b = widim_upper(X, k, epsilon).bound
        bounds[k] = b
        if not 2 * b < k * D:
            raise WidimGateFailed(f"widim bound {b} is not below k*D/2 = {k * D / 2} at k={k}", k=k)
    return bounds


def choose_tower_parameter(X: SystemDescriptor, D: int, epsilon: float, max_L: int = 64) -> int:
    """Least L with widim bound / k < D/2 for every k >= L (checked on
    [L, 2L+1]; catalogue bounds do not depend on k)."""
    for L in range(1, max_L + 1):
        try:
            widim_gate(X, D, epsilon, range(L, 2 * L + 2))
        except WidimGateFailed:
            continue
        return L
    raise WidimGateFailed(f"no tower parameter up to {max_L}")


class TowerMap(MapTable):
    """g(T^l x) = F_k(x)|_l for x in B_k = (h o pi)^{-1}(k), 0 <= l < k."""

    def __init__(self, X: SystemDescriptor, tower: Tower, levels: dict[int, PouMap], D: int):
        self.X, self.tower, self.levels, self.dim = X, tower, levels, D
        self.domain = X

    def __call__(self, p: PairPoint) -> np.ndarray:
        k, _, l = tower_coords(self.tower, p.right)
        x = apply_shift(self.X, p, -l)
        return self.levels[k](x)[l * self.dim : (l + 1) * self.dim]

    def orbit(self, p: PairPoint, lo: int, hi: int) -> np.ndarray:
        """Rows g(T^n p) for n = lo..hi, evaluated one tower column at a time."""
        t = self.tower
        visits = base_visits(t, p.right, lo - 2 * t.N - 1, hi + 1)
        visits = visits[bisect_right(visits, lo) - 1 :]
        out = np.empty((hi - lo + 1, self.dim))
        filled = 0
        left, right = p.left, p.right
        modulus = 1 << self.X.left.bits
        for idx, s in enumerate(visits):
            # T^s p, built directly (the hot path of every verification)
            b = SymbolicPoint(right.start - s, right.word, right.extender)
            q = PairPoint(AnglePoint((left.angle + s * self.X.left.alpha) % modulus, left.bits), b)
            k, _ = height_of(t, b)
            if idx + 1 < len(visits) and visits[idx + 1] != s + k:
                raise InvariantViolation(f"roof {k} at time {s} disagrees with next base visit {visits[idx + 1]}")
            block = self.levels[k](q).reshape(k, self.dim)
            a, b = max(s, lo), min(s + k - 1, hi)
            if a <= b:
                out[a - lo : b - lo + 1] = block[a - s : b - s + 1]
                filled += b - a + 1
        if filled != hi - lo + 1:
            raise InvariantViolation("orbit segment not fully covered by tower columns")
        return out


@dataclass
class TowerEmbedding:
    g: TowerMap
    f: MapTable
    X: SystemDescriptor
    tower: Tower
    D: int
    delta: float
    eta: float
    epsilon: float
    L: int
    gate: dict[int, int]
    level_reports: dict[int, PerturbationReport]
    seed: int

    def report(self) -> dict:
        return {
            "system": self.X.describe(),
            "seed_map": self.f.describe() if hasattr(self.f, "describe") else repr(self.f),
            "D": self.D,
            "delta": self.delta,
            "eta": self.eta,
            "epsilon": self.epsilon,
            "L": self.L,
            "seed": self.seed,
            "tower_certificates": self.tower.certificates,
            "tower_heights": self.tower.heights,
            "widim_gate": {str(k): {"bound": b, "threshold": k * self.D / 2, "pass": 2 * b < k * self.D}
                           for k, b in sorted(self.gate.items())},
            "levels": {str(k): dict(r.as_dict(), cover=self.g.levels[k].cover.report())
                       for k, r in sorted(self.level_reports.items())},
        }


def _base_samples(X: SystemDescriptor, tower: Tower, count: int, radius: int, seed: int) -> dict[int, list]:
    """Sampled points of each B_k, obtained by moving samples down their column."""
    buckets: dict[int, list] = {k: [] for k in tower.heights}
    for p in sample_points(X, count, radius, seed):
        k, _, l = tower_coords(tower, p.right)
        buckets[k].append(apply_shift(X, p, -l))
    return buckets


def tower_embed(X: SystemDescriptor, f: MapTable, delta: float, eta: float, seed: int,
                tower: Tower | None = None, L: int | None = None, epsilon: float | None = None,
                samples: int = 4000, sample_radius: int = 96) -> TowerEmbedding:
    """Build g: X -> [0,1]^D close to f with (I_g, pi) an eta-embedding.

    X must be a product whose right factor is an aperiodic subshift; pi is the
    projection onto it.
    """
    if X.kind != "product" or not X.right.symbolic:
        raise ValueError("tower_embed needs X = (something) x (subshift)")
    if delta <= 0 or eta <= 0:
        raise ValueError("delta and eta must be positive")
    D = f.dim
    if f.lipschitz is None:
        raise ModulusViolated("seed map has no Lipschitz certificate")
    if epsilon is None:
        epsilon = choose_epsilon(eta, delta, f.lipschitz)
    if not epsilon < eta:
        raise BadEpsilon("need epsilon < eta")
    modulus_gate(f, epsilon, delta)
    if L is None:
        L = choose_tower_parameter(X, D, epsilon)
    if tower is None:
        tower = build_tower(X.right, L)
    elif tower.N != L:
        raise ValueError("tower parameter differs from L")
    gate = widim_gate(X, D, epsilon, range(L + 1, 2 * L + 2))
    buckets = _base_samples(X, tower, samples, sample_radius, seed)
    levels, reports = {}, {}
    for k in tower.heights:
        within = tower.roof_partition[k]
        cover = widim_upper(X, k, epsilon, within=within).cover
        if not 2 * cover.order < k * D:
            raise WidimGateFailed(f"cover of B_{k} has order {cover.order}", k=k)
        block = OrbitBlockMap(f, X, k)
        g_k, rep = perturb_to_embedding(block, cover, delta, epsilon, buckets[k], seed=hash_seed(seed, k))
        levels[k], reports[k] = g_k, rep
    g = TowerMap(X, tower, levels, D)
    return TowerEmbedding(g, f, X, tower, D, delta, eta, epsilon, L, gate, reports, seed)


def hash_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


# ---------------------------------------------------------------------------
# eta-embedding verification


def _pi_window(p: PairPoint, W: int) -> str:
    return p.right.centered(W)


def sample_eta_pairs(X: SystemDescriptor, eta: float, pair_count: int, radius: int, seed: int,
                     same_fibre_share: float = 0.5) -> list[tuple[PairPoint, PairPoint]]:
    """Pairs at certified distance >= eta.  A share of them lies in one
    pi-fibre (same symbolic window, circle distance >= eta)."""
    rng = np.random.default_rng(seed)
    metric = metric_for(X)
    same = int(round(pair_count * same_fibre_share))
    pairs = []
    base = sample_points(X, same, radius, hash_seed(seed, 1)) if same else []
    modulus = 1 << X.left.bits
    lo = int(math.ceil(eta * modulus))
    for p in base:
        offset = lo + random_bits(rng, X.left.bits + 8) % (modulus - 2 * lo + 1)
        q = PairPoint(AnglePoint((p.left.angle + offset) % modulus, X.left.bits), p.right)
        pairs.append((p, q))
    draw = 0
    while len(pairs) < pair_count:
        draw += 1
        chunk = sample_points(X, 2 * (pair_count - len(pairs)) + 2, radius, hash_seed(seed, 2, draw))
        for a, b in zip(chunk[::2], chunk[1::2]):
            if distance(metric, a, b).lower >= eta:
                pairs.append((a, b))
                if len(pairs) == pair_count:
                    break
    return pairs


def verify_eta_embedding(g: TowerMap, pairs, W: int, eta: float) -> dict:
    """For each pair, compare (g(T^n x))_{|n|<=W} together with the pi-window
    on [-W, W].  A violation is an exact equality of both."""
    by_factor = by_g = violations = 0
    min_sep = math.inf
    X = g.X
    metric = metric_for(X)
    for x, y in pairs:
        if distance(metric, x, y).lower < eta:
            raise ValueError("pair is not eta-separated")
        if _pi_window(x, W) != _pi_window(y, W):
            by_factor += 1
            continue
        sep = float(np.max(np.abs(g.orbit(x, -W, W) - g.orbit(y, -W, W))))
        if sep == 0.0:
            violations += 1
        else:
            by_g += 1
            min_sep = min(min_sep, sep)
    return {
        "pairs": len(pairs),
        "window": W,
        "eta": eta,
        "separated_by_factor": by_factor,
        "separated_by_g": by_g,
        "min_g_separation": min_sep if by_g else None,
        "violations": violations,
    }


# ---------------------------------------------------------------------------
# Symbolic coding and slab pairing


def interleave(n: int) -> int:
    """0, 1, -1, 2, -2, ..."""
    return (n + 1) // 2 if n % 2 else -(n // 2)


def interval_code(z: SymbolicPoint, alphabet: str, precision_terms: int) -> Fraction:
    """sum_n digit(z_psi(n)) (2l+1)^-(n+1) over the first 2P+1 interleaved
    coordinates, with digits 1..l.  Exact."""
    l = len(alphabet)
    base = 2 * l + 1
    if z.radius < precision_terms:
        raise InsufficientWindow(f"interval code needs radius {precision_terms}")
    total = Fraction(0)
    scale = Fraction(1, base)
    for n in range(2 * precision_terms + 1):
        total += (alphabet.index(z.symbol(interleave(n))) + 1) * scale
        scale /= base
    return total


def slab_embed(v, j: int, l: int):
    """Put the first coordinate of v in slab [(2j-2)/(2l-1), (2j-1)/(2l-1)]."""
    if not 1 <= j <= l:
        raise ValueError(f"symbol index {j} outside 1..{l}")
    out = list(v)
    out[0] = (2 * j - 2 + v[0]) / (2 * l - 1)
    return out


def slab_inverse(w, l: int):
    """Recover (v, j) from slab_embed's output."""
    y = w[0]
    j = min(l, int(math.floor(y * (2 * l - 1) / 2)) + 1)
    v = list(w)
    v[0] = y * (2 * l - 1) - (2 * j - 2)
    return v, j


def final_embed(g: TowerMap, p: PairPoint, W: int) -> np.ndarray:
    """Rows n = -W..W of x -> slab_embed(g(T^n x), pi(x)_n) in [0,1]^D."""
    alphabet = g.X.right.alphabet
    l = len(alphabet)
    values = g.orbit(p, -W, W)
    out = values.copy()
    for row, n in enumerate(range(-W, W + 1)):
        j = alphabet.index(p.right.symbol(n)) + 1
        out[row, 0] = (2 * j - 2 + values[row, 0]) / (2 * l - 1)
    return out


def _final_row(g: TowerMap, p: PairPoint, n: int) -> np.ndarray:
    alphabet = g.X.right.alphabet
    l = len(alphabet)
    row = g(apply_shift(g.X, p, n)).copy()
    j = alphabet.index(p.right.symbol(n)) + 1
    row[0] = (2 * j - 2 + row[0]) / (2 * l - 1)
    return row


def final_separation(g: TowerMap, pairs, W: int) -> dict:
    """Sup-distance of final_embed windows for each pair.

    Pairs whose pi-windows differ are compared on the first coordinate where
    the symbols differ (slabs put those rows at least 1/(2l-1) apart); that
    row is a lower bound for the window's sup-distance.  Other pairs are
    compared on the whole window.
    """
    l = len(g.X.right.alphabet)
    worst = math.inf
    failures = 0
    factor_gap = math.inf
    for x, y in pairs:
        wx, wy = _pi_window(x, W), _pi_window(y, W)
        if wx != wy:
            n = next(i for i in range(2 * W + 1) if wx[i] != wy[i]) - W
            sep = float(np.max(np.abs(_final_row(g, x, n) - _final_row(g, y, n))))
            factor_gap = min(factor_gap, sep)
        else:
            sep = float(np.max(np.abs(final_embed(g, x, W) - final_embed(g, y, W))))
        if sep == 0.0:
            failures += 1
        worst = min(worst, sep)
    return {
        "pairs": len(pairs),
        "min_separation": worst,
        "min_separation_factor_pairs": factor_gap if factor_gap < math.inf else None,
        "slab_gap": 1 / (2 * l - 1),
        "failures": failures,
    }


def equivariance_defects(g: TowerMap, points, W: int) -> int:
    """Rows where final_embed(Tx)[n] and final_embed(x)[n+1] are not bit-identical."""
    bad = 0
    for p in points:
        a = final_embed(g, p, W)
        b = final_embed(g, apply_shift(g.X, p, 1), W)
        bad += int(np.sum(np.any(a[1:] != b[:-1], axis=1)))
    return bad
