import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdembed import cli, embed, geometry as geo, systems, towers
from mdembed.errors import (BadEpsilon, DimensionTooSmall, InsufficientWindow, ModulusViolated,
                            OrderTooLarge)
from mdembed.systems import AnglePoint, PairPoint, SymbolicPoint

ROT = systems.golden_rotation()


# -- general position ------------------------------------------------------

def test_single_vertex():
    c = embed.general_position_vertices(3, 1, 1, [[0.5, 0.5, 0.5]], 0.1, seed=0)
    assert c.vertices.shape == (1, 3)
    assert np.max(np.abs(c.vertices - 0.5)) < 0.1


def test_dimension_too_small():
    with pytest.raises(DimensionTooSmall):
        embed.general_position_vertices(2, 4, 1, np.full((4, 2), 0.5), 0.1, seed=0)


def _segments_meet(p0, p1, q0, q1) -> bool:
    """Least-squares oracle: do segments [p0,p1] and [q0,q1] in R^3 intersect?"""
    A = np.column_stack([p1 - p0, -(q1 - q0)])
    sol, *_ = np.linalg.lstsq(A, q0 - p0, rcond=None)
    s, t = sol
    if not (0 <= s <= 1 and 0 <= t <= 1):
        return False
    return np.linalg.norm(p0 + s * (p1 - p0) - (q0 + t * (q1 - q0))) < 1e-12


def test_segment_pairs_oracle():
    anchors = np.random.default_rng(1).random((6, 3)) * 0.6 + 0.2
    c = embed.general_position_vertices(3, 6, 1, anchors, 0.15, seed=5)
    u = c.vertices
    assert np.all(np.abs(u - anchors) < 0.15)
    segs = list(itertools.combinations(range(6), 2))
    for (i, j), (k, l) in itertools.combinations(segs, 2):
        if {i, j} & {k, l}:
            continue
        assert not _segments_meet(u[i], u[j], u[k], u[l])
    # and no four vertices are coplanar (triple-product oracle)
    for q in itertools.combinations(range(6), 4):
        v = u[list(q[1:])] - u[q[0]]
        assert abs(np.linalg.det(v)) > 1e-9


def test_degenerate_vertices_flagged():
    u = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [0.3, 0.2, 0.9]], dtype=float)
    bad, _, _ = embed.check_general_position(u, 1)
    assert bad == (0, 1, 2, 3)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10**6))
def test_bound_below_true_singular_value(s, seed):
    pts = np.random.default_rng(seed).random((s, 6))
    true = np.linalg.svd(pts[1:] - pts[0], compute_uv=False).min()
    assert embed.affine_independence_bound(pts) <= true * (1 + 1e-9)


# -- perturbation to an epsilon-embedding -----------------------------------

def test_perturbation_circle():
    f = embed.planar_circle_seed(0.15)
    cover = geo.arc_cover(0.2)
    pts = systems.sample_points(ROT, 3000, seed=1)
    g, rep = embed.perturb_to_embedding(f, cover, delta=0.2, epsilon=0.2, sample=pts, seed=2)
    assert rep.sup_deviation < 0.2 and rep.order == 1
    res = embed.verify_epsilon_embedding(g, geo.CIRCLE, pts, 0.2, 2000, seed=3)
    assert res["violations"] == 0 and res["min_separation"] > 0


def test_modulus_violated():
    # (1+cos)/2, (1+sin)/2 has Lipschitz pi, and pi * 0.2 >= 0.2
    f = embed.CircleSeedMap([0.5, 0.5, 0.0], [0.5, 0.5, 0.0], phases=[0.0, 0.25, 0.0])
    pts = systems.sample_points(ROT, 50, seed=1)
    with pytest.raises(ModulusViolated):
        embed.perturb_to_embedding(f, geo.arc_cover(0.2), 0.2, 0.2, pts, seed=0)


def test_order_too_large():
    f = embed.CircleSeedMap([0.5, 0.5], [0.02, 0.02], phases=[0.0, 0.25])
    pts = systems.sample_points(ROT, 50, seed=1)
    with pytest.raises(OrderTooLarge):
        embed.perturb_to_embedding(f, geo.arc_cover(0.2), 0.2, 0.2, pts, seed=0)


def test_mesh_not_below_eps():
    f = embed.planar_circle_seed(0.15)
    with pytest.raises(BadEpsilon):
        embed.perturb_to_embedding(f, geo.arc_cover(0.3), 0.2, 0.2, [], seed=0)


# -- tower assembly ----------------------------------------------------------

def test_parameters(pipeline):
    assert pipeline.L == 3
    assert pipeline.epsilon == pytest.approx(0.045)
    assert all(2 * b < k for k, b in pipeline.gate.items())
    assert sorted(pipeline.gate) == [4, 5, 6, 7]
    assert set(pipeline.g.levels) == set(pipeline.tower.heights)


def test_assembly_rule(pipeline):
    g, X = pipeline.g, pipeline.X
    for p in systems.sample_points(X, 100, window_radius=60, seed=4):
        k, _, l = towers.tower_coords(pipeline.tower, p.right)
        x = systems.apply_shift(X, p, -l)
        assert np.array_equal(g(p), g.levels[k](x)[l : l + 1])
        assert abs(g(p) - pipeline.f(p)).max() < pipeline.delta


def test_orbit_matches_pointwise(pipeline):
    g, X = pipeline.g, pipeline.X
    for p in systems.sample_points(X, 10, window_radius=80, seed=5):
        rows = g.orbit(p, -12, 12)
        for n in range(-12, 13):
            assert np.array_equal(rows[n + 12], g(systems.apply_shift(X, p, n)))


def test_eta_pairs_separated(pipeline):
    W = 32
    radius = cli._sample_radius(pipeline, W)
    pairs = embed.sample_eta_pairs(pipeline.X, 0.05, 300, radius, seed=6)
    metric = geo.metric_for(pipeline.X)
    assert all(geo.distance(metric, x, y).lower >= 0.05 for x, y in pairs)
    res = embed.verify_eta_embedding(pipeline.g, pairs, W, 0.05)
    assert res["violations"] == 0 and res["separated_by_g"] > 0


def test_tower_embed_rejects():
    X = systems.product(ROT, systems.fibonacci())
    with pytest.raises(ValueError):
        embed.tower_embed(X, embed.circle_seed(1), delta=0.0, eta=0.05, seed=0)
    with pytest.raises(ValueError):
        embed.tower_embed(systems.fibonacci(), embed.circle_seed(1), 0.2, 0.05, seed=0)


def test_choose_epsilon():
    assert embed.choose_epsilon(0.05, 0.2, np.pi) == pytest.approx(0.045)
    assert embed.choose_epsilon(0.5, 0.2, np.pi) == pytest.approx(0.9 * 0.2 / np.pi)


# -- corollary glue ----------------------------------------------------------

def test_interleave():
    assert [embed.interleave(n) for n in range(6)] == [0, 1, -1, 2, -2, 3]


def test_interval_code_gap():
    l = 3
    a = SymbolicPoint(-4, "012021012")
    b = SymbolicPoint(-4, "012011012")  # differs at coordinate 0 only
    ca, cb = embed.interval_code(a, "012", 4), embed.interval_code(b, "012", 4)
    base = 2 * l + 1
    # geometric-series bound: one digit step at weight 1/base minus the largest possible tail
    gap = Fraction(1, base) - (l - 1) * Fraction(1, base * (base - 1))
    assert abs(ca - cb) >= gap > 0
    assert embed.interval_code(a, "012", 4) == ca


def test_interval_code_degenerate():
    z1, z2 = SymbolicPoint(-3, "0000000"), SymbolicPoint(-2, "00000")
    assert embed.interval_code(z1, "0", 2) == embed.interval_code(z2, "0", 2)
    with pytest.raises(InsufficientWindow):
        embed.interval_code(z2, "0", 3)


@settings(max_examples=200, deadline=None)
@given(st.text("01", min_size=9, max_size=9), st.text("01", min_size=9, max_size=9))
def test_interval_code_injective(u, v):
    a, b = SymbolicPoint(-4, u), SymbolicPoint(-4, v)
    assert (embed.interval_code(a, "01", 4) == embed.interval_code(b, "01", 4)) == (u == v)


def test_slab_examples():
    assert embed.slab_embed([0.3, 0.7], 1, 1) == [0.3, 0.7]
    a = embed.slab_embed([0.3], 1, 2)[0]
    b = embed.slab_embed([0.3], 2, 2)[0]
    assert b - a >= 1 / 3 - 1e-15
    with pytest.raises(ValueError):
        embed.slab_embed([0.1], 3, 2)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 2), st.integers(1, 2))
def test_slabs_disjoint(v, w, i, j):
    a, b = embed.slab_embed([v], i, 2)[0], embed.slab_embed([w], j, 2)[0]
    if i != j:
        assert abs(a - b) >= 1 / 3 - 1e-12
    back, jj = embed.slab_inverse([a], 2)
    assert jj == i and back[0] == pytest.approx(v)


def test_final_embed_equivariant(pipeline):
    W = 8
    radius = cli._sample_radius(pipeline, W) + 1
    pts = systems.sample_points(pipeline.X, 5, radius, seed=1)
    assert embed.equivariance_defects(pipeline.g, pts, W) == 0
    out = embed.final_embed(pipeline.g, pts[0], W)
    assert out.shape == (2 * W + 1, 1) and ((0 <= out) & (out <= 1)).all()


def test_hash_seed_stable():
    assert embed.hash_seed(1, 2) == embed.hash_seed(1, 2) != embed.hash_seed(2, 1)


def test_final_row_matches_window(pipeline):
    W = 6
    radius = cli._sample_radius(pipeline, W) + 1
    p = systems.sample_points(pipeline.X, 1, radius, seed=2)[0]
    full = embed.final_embed(pipeline.g, p, W)
    for n in range(-W, W + 1):
        assert np.array_equal(embed._final_row(pipeline.g, p, n), full[n + W])


def test_final_separation_slab_gap(pipeline):
    W = 8
    radius = cli._sample_radius(pipeline, W) + 1
    pairs = embed.sample_eta_pairs(pipeline.X, 0.05, 60, radius, seed=4)
    res = embed.final_separation(pipeline.g, pairs, W)
    assert res["failures"] == 0
    assert res["min_separation_factor_pairs"] >= res["slab_gap"] - 1e-12
