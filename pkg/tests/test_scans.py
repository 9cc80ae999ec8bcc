import math

import numpy as np
import pytest

from surfacewalk import oracle
from surfacewalk.green import green_field, green_fields
from surfacewalk.green.scans import (UnusableGrid, ancona_free, ancona_scan, critical_grid,
                                     decay_fit, eta_and_exponent, free_eta_exponent,
                                     free_gap_exponent, geodesic_words, rw_metric_checks,
                                     sphere_sum_lower_bound)
from surfacewalk.group.geometry import geodesics_between


def test_geodesic_words_explicit_and_lumped(ball6, lumped6):
    rng = np.random.default_rng(4)
    for row in rng.integers(ball6.sphere_ptr[4], ball6.sphere_ptr[5], 10):
        w = ball6.word(int(row))
        ref = sorted(s.letters for s in geodesics_between(0, int(row), ball6))
        assert geodesic_words(ball6, w) == ref
        assert geodesic_words(lumped6, w) == ref


def test_ancona_on_tree_is_inverse_green(free_ball6):
    fs = green_fields([0.8, 1.2], free_ball6, tol=1e-14)
    scan = ancona_scan(fs, [2, 3], pairs=5)
    for f, c in zip(fs, scan.C):
        # every split gives 1/G(1,1) on a tree, up to the ball truncation
        assert abs(c * f.values[0] - 1) < 1e-9
        assert abs(c / ancona_free(f.r, 2) - 1) < 1e-2


def test_ancona_surface_bounded_below(ball6):
    fs = green_fields([1.0, 1.3], ball6)
    scan = ancona_scan(fs, [2, 4], pairs=8, seed=2)
    for f, c in zip(fs, scan.C):
        assert c >= 1 / f.values[0] * (1 - 1e-12)
    assert 1 <= scan.flatness < 2
    assert scan.n_pairs == 16 and all(w is not None for w in scan.worst)


def test_free_gap_exponent_with_correction():
    fit = free_gap_exponent(1, np.geomspace(1e-4, 1e-2, 9))
    assert abs(fit.corrected["slope"] - 0.5) < 0.005
    assert fit.slope < fit.corrected["slope"]


def test_free_eta_exponent_sign():
    fit = free_eta_exponent(2, np.geomspace(1e-6, 1e-4, 7))
    assert abs(fit.slope + 0.5) < 0.05


def test_critical_grid_below_R():
    g = critical_grid(1.5)
    assert np.all(np.diff(g) > 0) and g[-1] < 1.5


def test_eta_exponent_rejects_unusable_grid(lumped6):
    fs = green_fields([1.0, 1.1], lumped6, boundary=True)
    with pytest.raises(UnusableGrid):
        eta_and_exponent(fs, 1.508, rel_tol=1e-12)


def test_eta_exponent_runs_on_usable_grid(lumped6):
    fs = green_fields([0.9, 1.0, 1.1, 1.2], lumped6)
    fit = eta_and_exponent(fs, 1.508, rel_tol=1.0)
    assert fit.slope < 0 and len(fit.used) == 4


def test_decay_rate_on_tree(tree12):
    f = green_field(1.0, tree12, tol=1e-14)
    d = decay_fit(f, (1, 8))
    assert abs(d.rate - 1 / 7) < 1e-6
    assert d.eventually_decreasing


def test_sphere_sums_at_least_r_power(ball6):
    for r in (1.0, 1.2, 1.45):
        f = green_field(r, ball6)
        assert np.all(sphere_sum_lower_bound(f) >= 0)


def test_sphere_sum_bound_needs_r_at_least_one(ball6):
    # the bound uses r^n >= r^m for n >= m; below r = 1 it fails on outer spheres
    f = green_field(0.7, ball6)
    assert np.any(sphere_sum_lower_bound(f) < 0)


def test_rw_metric(ball6):
    f = green_field(1.0, ball6, boundary=True)
    rep = rw_metric_checks(f, samples=200)
    assert rep.triangle_violations == 0
    assert 0 < rep.C1 <= rep.C2
    # F(1,a) <= r max F over neighbours, so d_RW is at least -log of that per step
    assert rep.C1 > 0.5
