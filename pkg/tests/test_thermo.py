import math

import numpy as np
import pytest

from surfacewalk import oracle, thermo
from surfacewalk.automaton import free_automaton
from surfacewalk.green import green_field, green_fields
from surfacewalk.group import radial_tree_ball


@pytest.fixture(scope="module")
def tree30():
    return radial_tree_ball(2, 30)


@pytest.mark.parametrize("theta,r", [(1.0, 1.0), (2.0, 0.8), (2.0, 1.2)])
def test_pressure_matches_tree(tree30, theta, r):
    f = green_field(r, tree30, tol=1e-14)
    p = thermo.pressure(theta, r, f)
    assert abs(p.slope - float(oracle.tree_pressure(theta, r, 2))) < 1e-6
    assert not p.warning


def test_pressure_scan_increasing(tree30):
    fs = green_fields([0.8, 1.0, 1.2], tree30, tol=1e-14)
    ests, inc = thermo.pressure_scan(2.0, fs)
    assert inc and all(e.slope < 0 for e in ests)


def test_pressure_window_errors(tree12):
    f = green_field(1.0, tree12)
    with pytest.raises(thermo.WindowError):
        thermo.pressure(1.0, 1.0, f, window=(5, 20))
    with pytest.raises(ValueError):
        thermo.pressure(1.0, 1.1, f)


def test_cocycle_constant_on_tree(tree12):
    f = green_field(1.0, tree12, tol=1e-14)
    c = thermo.cocycle(1.0, 5, free_automaton(2), f, samples=10)
    # f_k = log F~_r for every k; F~_1 = 1/7 for g = 2
    assert np.allclose(c.values[:, :5], math.log(1 / 7), atol=1e-9)


def test_cocycle_surface(aut2, ball6):
    f = green_field(1.0, ball6, boundary=True)
    c = thermo.cocycle(1.0, 4, aut2, f, samples=20, seed=1)
    assert c.usable_n >= 1
    assert np.all(c.values[:, :3] < 0)
    assert c.differences[1] < c.differences[0]


def test_birkhoff_sum_telescopes(ball6):
    f = green_field(1.2, ball6)
    w = ball6.word(ball6.sphere_ptr[5] + 17)
    s, closed = thermo.birkhoff_sum(f, w)
    assert abs(s - closed) < 1e-10


def test_sphere_gibbs_is_probability(lumped6):
    f = green_field(1.3, lumped6)
    g = thermo.sphere_gibbs(f, 4)
    assert abs(g.weights.sum() - 1) < 1e-12
    assert abs(g.normalization - f.sphere_sums(2.0)[4]) < 1e-12 * g.normalization
    rows = g.sample(50, np.random.default_rng(0))
    assert np.all(lumped6.row_sphere()[rows] == 4)


def test_sphere_sum_checks(lumped6):
    fc, fs = green_fields([1.45, 1.0], lumped6)
    chk = thermo.sphere_sum_checks(fc, fs, window=(2, 5))
    assert chk["sub_decreasing"] and chk["theta1_ge_rm"]


def test_level_counts_on_tree(tree12):
    f = green_field(1.0, tree12, tol=1e-14)
    o = oracle.covering_oracle(1.0, 2)
    eps = [float(o.green(m)) * 0.999 for m in (2, 3, 4, 5)]
    lc = thermo.level_set_count(eps, f)
    for e, n in zip(lc.eps, lc.lower):
        assert n == oracle.tree_level_count(e, 1.0, 2)
    assert not lc.excluded.any()


def test_level_floor_excludes_small_eps(tree12):
    f = green_field(1.0, tree12)
    floor = thermo.level_floor(f)
    lc = thermo.level_set_count([floor / 2, floor * 10, floor * 100], f)
    assert list(lc.excluded) == [True, False, False]


def test_martin_kernel_on_tree(tree30):
    f = green_field(1.2, tree30, tol=1e-14)
    mk = thermo.martin_kernel(1.2, (0,), (0, 2, 0, 2, 4), f)
    o = oracle.covering_oracle(1.2, 2)
    # x = a lies on the ray: K(x, zeta) = 1 / F~
    assert np.allclose(mk.ratios, float(1 / o.F), rtol=1e-9)
    assert not mk.truncated


def test_lambda_kernel_runs(ball6):
    f = green_field(1.0, ball6)
    vals, errs, _ = thermo.lambda_kernel(1.0, (4,), (0, 2, 0), (6, 4, 6), f)
    assert len(vals) >= 2 and np.all(vals > 0)


def test_geodesic_average_matches_convolution(ball6):
    f = green_field(0.5, ball6, deriv=True)
    x = ball6.word(ball6.sphere_ptr[2] + 3)
    rows, avg = thermo.geodesic_averages(f, 2)
    direct, missing = thermo.direct_average(f, x, 4)
    i = list(rows).index(ball6.find(x))
    assert missing == 0
    assert abs(direct / avg[i] - 1) < 1e-3


def test_geodesic_average_report(lumped6):
    f = green_field(1.2, lumped6, deriv=True)
    rep = thermo.geodesic_average_stability(1.2, [2, 3, 4], f)
    assert len(rep.mean) == 3 and all(m > 0 for m in rep.mean)
    assert rep.xi == pytest.approx(rep.xi_eta / f.eta())


def test_empirical_delta(ball6):
    # small triangles are often tripods (delta 0); 300 samples find fatter ones
    d = thermo.empirical_delta(ball6, samples=300, vertex_radius=3)
    assert 1 <= d <= ball6.radius + 1
