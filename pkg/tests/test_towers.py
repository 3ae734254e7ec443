from pathlib import Path

import pytest

from mdembed import clopen, systems, towers
from mdembed.errors import AperiodicityRequired, InsufficientWindow, NotInBase

from conftest import factors

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module", params=[1, 2, 3, 4, 8])
def tower(request, fib):
    return towers.build_tower(fib, request.param)


def test_marker_lengths(fib, fib_word):
    assert towers.marker_window_length(fib, 1) == 3
    assert not {"000", "111"} & factors(fib_word, 3)
    L = towers.marker_window_length(fib, 2)
    assert L <= 16
    # brute-force scan oracle
    expect = next(n for n in range(1, 17) if all(systems.word_period(w, 2) == 0 for w in factors(fib_word, n)))
    assert L == expect


@pytest.mark.parametrize("sys_", [systems.full_shift(2), systems.sft(2, ["11"])])
def test_periodic_systems_rejected(sys_):
    with pytest.raises(AperiodicityRequired):
        towers.build_base(sys_, 2)


def test_n_zero_rejected(fib):
    with pytest.raises(ValueError):
        towers.build_tower(fib, 0)


def test_base_n4_roofs(fib):
    t = towers.build_tower(fib, 4)
    assert set(t.heights) <= set(range(5, 10))


def test_build_base_debug(fib):
    assert towers.build_base(fib, 3, debug=True) == towers.build_base(fib, 3)


def test_certificates_hold(tower):
    assert tower.certificates and all(tower.certificates.values())
    N = tower.N
    assert set(tower.heights) <= set(range(N + 1, 2 * N + 2))
    assert sorted(tower.coord_partition) == list(range(2 * N + 1))


def _visits(B, word):
    return [i for i in range(-B.anchor, len(word) - B.stop) if word[i + B.anchor : i + B.stop] in B.words]


def test_orbit_scan_oracle(tower, fib_word):
    """Independent check on a long orbit: gaps between base visits are the
    roof values and the coordinate is the time since the last visit."""
    word = fib_word[:20000]
    B = tower.base
    visits = _visits(B, word)
    gaps = {b - a for a, b in zip(visits, visits[1:])}
    N = tower.N
    assert gaps <= set(range(N + 1, 2 * N + 2))
    assert gaps == set(tower.heights)
    margin = 64
    for a, b in zip(visits, visits[1:]):
        if a < margin or b > len(word) - margin:
            continue
        for i in range(a, b):
            p = systems.SymbolicPoint(-i, word)
            c = towers.tower_coords(tower, p)
            assert c.level == i - a
            assert c.height == b - a


def test_transition_rule(tower, fib):
    for p in systems.sample_points(fib, 60, window_radius=48, seed=11):
        c = towers.tower_coords(tower, p)
        n = towers.tower_coords(tower, systems.apply_shift(fib, p, 1))
        if c.level + 1 < c.height:
            assert n.base_class == c.base_class and n.level == c.level + 1
        else:
            assert n.level == 0
            b = systems.apply_shift(fib, p, -c.level)
            nb = towers.return_map(tower, b)
            assert towers.height_of(tower, nb) == n.base_class


def test_return_map_roundtrip(tower, fib):
    for p in systems.sample_points(fib, 40, window_radius=48, seed=3):
        c = towers.tower_coords(tower, p)
        b = systems.apply_shift(fib, p, -c.level)
        assert b in tower.base
        nb = towers.return_map(tower, b)
        assert nb in tower.base
        assert towers.inverse_return_map(tower, nb) == b


def test_base_points_have_level_zero(tower, fib):
    for p in systems.sample_points(fib, 80, window_radius=48, seed=9):
        if p in tower.base:
            assert towers.tower_coords(tower, p).level == 0


def test_not_in_base(fib):
    t = towers.build_tower(fib, 2)
    for p in systems.sample_points(fib, 40, window_radius=32, seed=1):
        if p not in t.base:
            with pytest.raises(NotInBase):
                towers.return_map(t, p)
            break


def test_small_window(fib):
    t = towers.build_tower(fib, 4)
    p = systems.make_point(fib, "010")
    with pytest.raises(InsufficientWindow):
        towers.tower_coords(t, p)


def test_roof_level_formula(fib):
    """h^-1(k) agrees with first return times computed from S^j B directly."""
    t = towers.build_tower(fib, 2)
    B = t.base
    for k, part in t.roof_partition.items():
        direct = clopen.intersect(B, clopen.shift_set(B, -k))
        for j in range(1, k):
            direct = direct & ~clopen.shift_set(B, -j)
        assert part == direct


def test_golden_dump(fib):
    t = towers.build_tower(fib, 2)
    assert t.dump() == (DATA / "fib_tower_N2.txt").read_text()
