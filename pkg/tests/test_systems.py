from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from mdembed import systems
from mdembed.errors import InsufficientWindow, InvalidSystem, NotSymbolic
from mdembed.systems import AnglePoint, PairPoint, SymbolicPoint

from conftest import brute_words, factors, fibonacci_prefix


def test_full_shift_words():
    assert systems.admissible_words(systems.full_shift(2), 3) == brute_words("01", 3)


def test_sft_words_match_filter():
    s = systems.sft(2, ["11"])
    words = systems.admissible_words(s, 4)
    assert len(words) == 8
    assert words == brute_words("01", 4, ["11"])


def test_sft_essential_graph_drops_dead_ends():
    # "1" can never be followed by anything, so it is not in the subshift
    s = systems.sft(2, ["10", "11"])
    assert systems.admissible_words(s, 3) == {"000"}


def test_fibonacci_words(fib, fib_word):
    assert len(systems.admissible_words(fib, 4)) == 5
    for n in range(1, 31):
        words = systems.admissible_words(fib, n)
        assert len(words) == n + 1
        assert words == factors(fib_word, n)


def test_not_symbolic():
    with pytest.raises(NotSymbolic):
        systems.admissible_words(systems.golden_rotation(), 2)


def test_substitution_must_be_primitive():
    with pytest.raises(InvalidSystem):
        systems.substitution({"0": "00", "1": "1"})
    assert systems.is_primitive({"0": "01", "1": "0"})
    assert not systems.is_primitive({"0": "0", "1": "10"})


def test_rotation_needs_precision():
    with pytest.raises(InvalidSystem):
        systems.rotation(1, bits=32)
    with pytest.raises(InvalidSystem):
        systems.rotation(1 << 60)  # period 16


def test_golden_rotation_is_sqrt2_minus_1():
    r = systems.golden_rotation()
    assert abs(r.alpha_float - (2**0.5 - 1)) < 1e-15
    assert r.alpha % 2 == 1
    assert systems.rotation_period(r) == 1 << 64


def test_word_period():
    assert systems.word_period("010010", 6) == 3
    assert systems.word_period("0000", 4) == 1
    assert systems.word_period("01", 1) == 0 or systems.word_period("01", 1) > 1


@pytest.mark.parametrize("sys_", [systems.full_shift(2), systems.sft(2, ["11"])])
def test_periodic_witness_zero(sys_):
    c = systems.certify_aperiodic(sys_, 1)
    assert not c.aperiodic
    assert c.periodic_block == "0"


def test_fibonacci_aperiodic(fib, fib_word):
    c = systems.certify_aperiodic(fib, 10)
    assert c.aperiodic
    L = c.witness_length
    assert L <= 64
    # oracle: no factor of length L has a period <= 10, but some factor of length L-1 does
    assert all(systems.word_period(w, 10) == 0 for w in factors(fib_word, L))
    assert any(systems.word_period(w, 10) for w in factors(fib_word, L - 1))


def test_periodic_substitution_detected():
    s = systems.substitution({"0": "01", "1": "01"})
    c = systems.certify_aperiodic(s, 4)
    assert not c.aperiodic


@pytest.mark.parametrize("sys_", [systems.fibonacci(), systems.full_shift(2), systems.sft(2, ["11"]),
                                  systems.substitution({"0": "01", "1": "01"}),
                                  systems.substitution({"0": "001", "1": "0"})])
def test_certify_monotone(sys_):
    flags = [systems.certify_aperiodic(sys_, N).aperiodic for N in range(1, 9)]
    for a, b in zip(flags, flags[1:]):
        assert a or not b


def test_rotation_shift():
    r = systems.golden_rotation()
    p = systems.apply_shift(r, AnglePoint(0, 64), 1)
    assert p.angle == r.alpha
    back = systems.apply_shift(r, p, -1)
    assert back == AnglePoint(0, 64)


def test_symbolic_shift_reanchors():
    s = systems.full_shift(3)
    p = systems.make_point(s, "01201")
    assert p.start == -2
    q = systems.apply_shift(s, p, 1)
    assert q.start == -3 and q.word == p.word
    assert q.symbol(0) == p.symbol(1)


def test_shift_beyond_window(fib):
    p = systems.make_point(fib, "01001")
    with pytest.raises(InsufficientWindow):
        systems.apply_shift(fib, p, 3)


def test_make_point_rejects_inadmissible(fib):
    with pytest.raises(InvalidSystem):
        systems.make_point(fib, "0110")


def test_sample_rotation_reproducible():
    r = systems.golden_rotation()
    a = systems.sample_points(r, 3, seed=7)
    assert len(a) == 3 and all(isinstance(p, AnglePoint) for p in a)
    assert a == systems.sample_points(r, 3, seed=7)
    assert a != systems.sample_points(r, 3, seed=8)


def test_sample_fibonacci_admissible(fib, fib_word):
    pts = systems.sample_points(fib, 100, window_radius=64, seed=1)
    assert len(pts) == 100
    # factor filter: every window of radius 64 is a factor of the Fibonacci word
    allowed = factors(fib_word, 129)
    for p in pts:
        assert p.radius >= 64
        assert p.centered(64) in allowed


def test_sample_sft_admissible():
    s = systems.sft(3, ["11", "20", "02"])
    for p in systems.sample_points(s, 50, window_radius=10, seed=4):
        assert not any(f in p.word for f in ["11", "20", "02"])


def test_sample_product():
    X = systems.product(systems.golden_rotation(), systems.fibonacci())
    pts = systems.sample_points(X, 10, window_radius=32, seed=2)
    assert len(pts) == 10
    assert all(isinstance(p, PairPoint) and p.right.radius >= 32 for p in pts)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(-20, 20))
def test_shift_roundtrip(seed, k):
    X = systems.product(systems.golden_rotation(), systems.fibonacci())
    p = systems.sample_points(X, 1, window_radius=24, seed=seed)[0]
    q = systems.apply_shift(X, systems.apply_shift(X, p, k), -k)
    assert q == p


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), radius=st.integers(1, 30))
def test_sampled_windows_pass_factor_filter(seed, radius):
    fib = systems.fibonacci()
    p = systems.sample_points(fib, 1, window_radius=radius, seed=seed)[0]
    w = p.word
    for n in range(1, min(len(w), 12) + 1):
        assert factors(w, n) <= systems.admissible_words(fib, n)


def test_fibonacci_prefix_oracle_agrees_with_substitution():
    w = systems.long_word(systems.fibonacci(), 5000)
    assert w[:5000] == fibonacci_prefix(5000)[:5000]


def test_rotation_from_fraction_is_odd():
    r = systems.rotation(Fraction(1, 3))
    assert r.alpha % 2 == 1
