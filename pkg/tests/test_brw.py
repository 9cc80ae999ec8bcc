import numpy as np
import pytest

from surfacewalk import brw
from surfacewalk.green import green_field
from surfacewalk.group import ball_enumerate


@pytest.fixture(scope="module")
def ball4(gamma2):
    return ball_enumerate(gamma2, 4)


def test_poisson_inversion_moments():
    rng = np.random.default_rng(0)
    x = brw.poisson_inversion(rng, 1.3, 200000)
    assert abs(x.mean() - 1.3) < 0.01 and abs(x.var() - 1.3) < 0.02


def test_config_validation():
    with pytest.raises(ValueError):
        brw.BRWConfig(-1.0, 5)
    with pytest.raises(ValueError):
        brw.ColoredBRWConfig(1.0, 0.1, 2, 5, pioneers="fly")


def test_exact_tally_converges_to_green(ball4):
    ex = brw.brw_exact(0.6, 200, ball4)
    g = green_field(0.6, ball4).values
    assert np.allclose(ex, g, rtol=1e-12)


def test_plain_brw_matches_exact(ball4):
    conf = brw.BRWConfig(1.0, 10, replicas=3000, seed=5)
    t = brw.simulate_brw(conf, ball4)
    ex = brw.brw_exact(1.0, 10, ball4)
    rows = np.arange(9)
    z = (t.mean[0, rows] - ex[rows]) / t.se[0, rows]
    assert np.all(np.abs(z) < 4)
    assert t.mean[0, 0] >= 1.0


def test_simulation_is_deterministic(ball4):
    conf = brw.BRWConfig(1.2, 6, replicas=50, seed=11)
    a, b = brw.simulate_brw(conf, ball4), brw.simulate_brw(conf, ball4)
    assert np.array_equal(a.mean, b.mean)


@pytest.mark.parametrize("pioneers", ["jump", "stay"])
def test_colored_brw_matches_exact(ball4, pioneers):
    conf = brw.ColoredBRWConfig(1.0, 0.2, 2, 8, replicas=2000, seed=2, pioneers=pioneers)
    t = brw.colored_vk_mc(conf, ball4)
    ex = brw.colored_vk_horizon(1.0, 0.2, 2, 8, ball4, pioneers)
    for k in range(3):
        z = (t.mean[k, :9] - ex[k, :9]) / np.where(t.se[k, :9] > 0, t.se[k, :9], np.inf)
        assert np.all(np.abs(z) < 4)


def test_stay_variant_is_green_convolution(ball4):
    # sum_n C(n,k) R^(n-k) eps^k P^(n-k) = eps^k G_R^(k+1)
    R, eps = 0.7, 0.05
    hor = brw.colored_vk_horizon(R, eps, 2, 300, ball4, "stay")
    for k in range(3):
        val, err = brw.colored_vk_exact(eps, k, ball4, R)
        assert np.allclose(hor[k], val, rtol=1e-9)
        assert np.all(err >= 0)


def test_colors_sum_to_plain_walk(ball4):
    # summing the colors of a mean R + eps walk gives the plain mean R + eps walk
    R, eps, H = 0.8, 0.1, 12
    col = brw.colored_vk_horizon(R, eps, H, H, ball4, "jump")
    plain = brw.brw_exact(R + eps, H, ball4)
    assert np.allclose(col.sum(0), plain, rtol=1e-12)


def test_snapback_ratios_positive(ball4):
    H, ratios = brw.snapback_ratios(0.8, 0.1, 3, ball4)
    assert np.all(H > 0) and len(ratios) == 2
