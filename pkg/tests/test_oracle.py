from fractions import Fraction
import math

from hypothesis import given, settings, strategies as st
import mpmath as mp
import pytest

from surfacewalk import oracle


def test_catalan_numbers():
    assert [oracle.catalan(n) for n in range(8)] == [1, 1, 2, 5, 14, 42, 132, 429]
    assert oracle.catalan(10) == 16796
    with pytest.raises(ValueError):
        oracle.catalan(-1)


def test_catalan_gf_endpoints():
    assert oracle.catalan_gf(0) == 1
    assert oracle.catalan_gf(Fraction(1, 4)) == 2
    with pytest.raises(oracle.DomainError):
        oracle.catalan_gf(0.3)


def test_catalan_partial_sums_inside_the_disc():
    # z = 1/5: gf = (1 - sqrt(1/5)) * 5/2
    exact = oracle.catalan_gf(Fraction(1, 5))
    assert abs(float(exact) - (1 - math.sqrt(0.2)) * 2.5) < 1e-15
    s = oracle.catalan_partial_sum(Fraction(1, 5), 100)
    assert abs(mp.mpf(s.numerator) / s.denominator - exact) < 1e-10


def test_tree_closed_forms_g2_at_r1():
    # p = 1/8: sqrt(1 - 4pq) = 3/4, so F~ = 1/7 and G~ = 7/6
    o = oracle.covering_oracle(1, 2)
    with mp.workdps(50):
        assert abs(o.F - mp.mpf(1) / 7) < 1e-40
        assert abs(o.G - mp.mpf(7) / 6) < 1e-40
        assert abs(o.R - mp.sqrt(mp.mpf(16) / 7)) < 1e-40


def test_oracle_at_zero_and_at_R():
    o = oracle.covering_oracle(0, 3)
    assert o.F == 0 and o.G == 1
    top = oracle.covering_oracle(oracle.CoveringWalkParams(2).radius(), 2)
    # at R~ the discriminant vanishes: F~ = 1/(2qR), G~ = 2q/(2q-1)
    assert abs(top.G - mp.mpf(7) / 3) < 1e-12
    with pytest.raises(oracle.DomainError):
        oracle.covering_oracle(1.52, 2)


def test_return_probabilities_and_catalan_bound():
    p = oracle.tree_return_probabilities(6, 2)
    assert p[1] == 0 and p[2] == Fraction(1, 8)
    assert oracle.return_prob_lower_bound(1, 2, exact=True) == Fraction(7, 64)
    for n in range(4):
        assert oracle.return_prob_lower_bound(n, 2, exact=True) <= p[2 * n]


def test_green_from_return_probabilities():
    # G~_r(1,1) = sum_n p_n r^n
    p = oracle.tree_return_probabilities(120, 1)
    r = 0.8
    s = sum(float(x) * r ** n for n, x in enumerate(p))
    assert abs(s - float(oracle.covering_oracle(r, 1).G)) < 1e-12


def test_derivative_matches_difference():
    h = mp.mpf("1e-12")
    with mp.workdps(50):
        fd = (oracle.covering_oracle(1 + h, 2).G - oracle.covering_oracle(1 - h, 2).G) / (2 * h)
    assert abs(fd / oracle.green_derivative(1, 2) - 1) < 1e-15


def test_tree_eta_matches_sphere_sum():
    r, g = 1.2, 2
    o = oracle.covering_oracle(r, g)
    direct = sum(oracle.tree_sphere_size(m, g) * o.green(m) ** 2 for m in range(400))
    assert abs(direct / oracle.tree_eta(r, g) - 1) < 1e-12


def test_tree_level_count():
    o = oracle.covering_oracle(1, 2)
    # G~ F~^m >= eps exactly for m <= 2 at eps = G~ F~^2
    assert oracle.tree_level_count(o.green(2), 1, 2) == 1 + 8 + 56
    assert oracle.tree_level_count(2.0, 1, 2) == 0


@settings(max_examples=60, deadline=None)
@given(g=st.integers(1, 5), t=st.floats(0, 1))
def test_first_passage_fixed_point(g, t):
    with mp.workdps(50):
        r = mp.mpf(t) * oracle.CoveringWalkParams(g).radius()
        o = oracle.covering_oracle(r, g)
        p, q = mp.mpf(1) / (4 * g), 1 - mp.mpf(1) / (4 * g)
        assert abs(o.F - (p * r + q * r * o.F ** 2)) < 1e-30
        # G = 1 / (1 - r F): the walk leaves along one of 4g edges
        if r > 0:
            F1 = (o.G - 1) / (r * o.G)
            assert abs(F1 - o.F) < 1e-25
        assert 0 <= o.F <= 1


@settings(max_examples=40, deadline=None)
@given(g=st.integers(1, 4), a=st.floats(0, 0.98), b=st.floats(0, 0.98))
def test_green_monotone_in_r(g, a, b):
    R = oracle.CoveringWalkParams(g).radius()
    lo, hi = sorted((a, b))
    assert oracle.covering_oracle(lo * R, g).G <= oracle.covering_oracle(hi * R, g).G
