import math
import warnings

import numpy as np
from hypothesis import given, settings, strategies as st
import pytest

from surfacewalk import oracle
from surfacewalk.green import (CertificateWarning, avoidance, complement_of,
                               derivative_identity_check, first_passage, green_field,
                               green_fields, inequality_suite, renewal_residual,
                               restricted_green, return_moments, spectral_radius, sweep)
from surfacewalk.green import kernels
from surfacewalk.group import radial_tree_ball


def _common(big, small, fld_big, fld_small):
    """Values of two fields on the elements of the smaller ball."""
    rows = np.arange(small.n_rows)
    big_rows = np.array([big.find(small.word(i)) for i in rows])
    return fld_big.values[big_rows], fld_small.values[rows]


def test_r_zero_is_indicator(ball5):
    f = green_field(0.0, ball5)
    assert f.values[0] == 1.0 and np.all(f.values[1:] == 0)


def test_small_r_coefficients(ball5):
    # G_r(1,1) = 1 + r^2/8 + O(r^4), G_r(1,a) = r/8 + O(r^3)
    r = 1e-3
    f = green_field(r, ball5)
    assert abs((f.values[0] - 1) / r ** 2 - 1 / 8) < 1e-5
    assert abs(f.value((0,)) / r - 1 / 8) < 1e-5


@pytest.mark.parametrize("r", [0.5, 1.0, 1.4])
def test_radial_tree_matches_oracle(r):
    b = radial_tree_ball(2, 40)
    f = green_field(r, b, tol=1e-14)
    o = oracle.covering_oracle(r, 2)
    for m in range(12):
        assert abs(f.values[m] / float(o.green(m)) - 1) < 1e-9


def test_explicit_free_ball_equals_radial(free_ball6):
    fe = green_field(1.2, free_ball6)
    fr = green_field(1.2, radial_tree_ball(2, 6))
    rs = free_ball6.row_sphere()
    assert np.allclose(fe.values, fr.values[rs], rtol=1e-12)


def test_lumped_equals_explicit(ball6, lumped6):
    fe = green_field(1.3, ball6)
    fl = green_field(1.3, lumped6)
    for row in range(0, ball6.n_rows, 131):
        assert abs(fl.value(ball6.word(row)) / fe.values[row] - 1) < 1e-11


def test_monotone_in_radius(ball5, ball6):
    a, b = _common(ball6, ball5, green_field(1.3, ball6), green_field(1.3, ball5))
    assert np.all(a >= b * (1 - 1e-14))


def test_horizon_tail_certificate(ball5):
    short = green_field(1.4, ball5, horizon=40)
    full = green_field(1.4, ball5, tol=1e-15)
    assert np.all(short.values <= full.values * (1 + 1e-14))
    assert np.all(full.values <= (short.values + short.tail) * (1 + 1e-12))


def test_boundary_estimate_is_finite_inside(ball6):
    f = green_field(1.0, ball6, boundary=True)
    inner = ball6.sphere_ptr[ball6.radius - 1]
    assert np.all(np.isfinite(f.boundary[:inner]))
    assert np.all(f.boundary[:inner] >= 0)


def test_sweep_grid_matches_single_r(ball5):
    fs = green_fields([0.7, 1.1], ball5)
    assert np.allclose(fs[1].values, green_field(1.1, ball5).values, rtol=1e-13)


def test_derivative_field_matches_difference(ball5):
    h = 1e-5
    f = green_field(1.2, ball5, deriv=True)
    a, b = green_field(1.2 - h, ball5), green_field(1.2 + h, ball5)
    fd = (b.values[:50] - a.values[:50]) / (2 * h)
    assert np.allclose(f.deriv[:50], fd, rtol=1e-6)


def test_numba_and_numpy_kernels_agree(ball5):
    op = ball5.op
    v = np.random.default_rng(0).random(op.n)
    a = kernels.push(op, v, use_numba=True)
    b = kernels.push(op, v, use_numba=False)
    assert np.allclose(a, b, rtol=1e-13, atol=0)


def test_first_passage_is_taboo_green(ball6):
    r = 0.6
    f = green_field(r, ball6)
    x = (0, 2)
    fp = first_passage(r, (), x, f)
    taboo = restricted_green(r, (), x, complement_of(ball6, x), ball6)
    assert abs(fp.value - taboo.value) < 1e-6 * fp.value


def test_first_passage_warns_on_weak_certificate(ball5):
    f = green_field(1.5, ball5, boundary=True)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        first_passage(1.5, (), ball5.word(ball5.n_rows - 1), f)
    assert any(issubclass(w.category, CertificateWarning) for w in rec)


def test_avoidance_below_return_function(ball6):
    r = 1.0
    A = avoidance([r], (0,), ball6)[0]
    G0 = green_field(r, ball6).values[0]
    U = 1 - 1 / G0                       # all first returns
    assert 0 < A.value < U


@pytest.mark.parametrize("r", [0.5, 1.0, 1.45])
def test_renewal_residual_below_certificate(ball6, r):
    res, cert = renewal_residual(r, ball6)
    assert res <= cert


def test_derivative_identity(ball5):
    chk = derivative_identity_check(1.0, ball5)
    assert chk.rel_error <= chk.certificate
    assert abs(chk.series / chk.rhs - 1) < 1e-10


def test_inequality_suite_small(ball6):
    rep = inequality_suite([0.8, 1.2], ball6, samples=200, seed=1)
    assert not rep.violations
    counts = rep.counts()
    assert set(counts) == {"harnack", "retracing", "renewal", "backscattering",
                           "supermultiplicativity"}


def test_moments_agree_with_tree_below_relator_length(lumped6):
    # a closed path shorter than the relator lifts to a closed path on the tree
    p = return_moments(lumped6)
    t = oracle.tree_return_probabilities(12, 2)
    for n in range(4):
        assert abs(p[n] - float(t[2 * n])) < 1e-15
    assert p[4] > float(t[8])


def test_spectral_radius_free_contains_tree_value():
    b = radial_tree_ball(2, 40)
    est = spectral_radius(b.pres, b)
    R = float(oracle.CoveringWalkParams(2).radius())
    assert est.lower <= R <= est.upper + 1e-12


def test_spectral_radius_surface_bracket(lumped6, gamma2):
    est = spectral_radius(gamma2, lumped6)
    assert est.lower <= est.R_hat <= est.upper
    assert est.upper <= float(oracle.CoveringWalkParams(2).radius())
    assert est.lower_rigorous < math.sqrt(2) < est.lower


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.05, 1.4), b=st.floats(0.05, 1.4))
def test_green_monotone_in_r(ball5, a, b):
    lo, hi = sorted((a, b))
    fl, fh = green_fields([lo, hi], ball5)
    assert np.all(fl.values <= fh.values * (1 + 1e-14))


def test_cw_ratio_kernels_agree(ball5):
    op = ball5.op
    v0 = np.zeros(op.n)
    v0[0] = 1.0
    v1 = kernels.push(op, v0)
    v2 = kernels.push(op, v1)
    cs = np.geomspace(0.1, 10, 7)
    a = kernels.cw_ratios(v0, v1, v2, cs, use_numba=True)
    b = kernels.cw_ratios(v0, v1, v2, cs, use_numba=False)
    assert np.array_equal(np.isinf(a), np.isinf(b))
    fin = np.isfinite(a)
    assert np.allclose(a[fin], b[fin], rtol=1e-14)


def test_long_sweep_near_R_does_not_overflow():
    # thousands of steps: r^n overflows and P^n underflows without rescaling
    g = 2
    R = float(oracle.CoveringWalkParams(g).radius())
    f = green_field(0.99 * R, radial_tree_ball(g, 60), tol=1e-14, deriv=True)
    assert f.horizon > 2000
    o = oracle.covering_oracle(0.99 * R, g)
    assert abs(f.values[0] / float(o.G) - 1) < 1e-7
    assert abs(f.deriv[0] / float(oracle.green_derivative(0.99 * R, g)) - 1) < 1e-5
