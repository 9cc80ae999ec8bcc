import numpy as np
from hypothesis import given, settings, strategies as st
import pytest

from surfacewalk.group import (GroupPresentation, WordError, ball_enumerate, dehn_reduce,
                               free_reduce, inverse_word, is_identity, radial_tree_ball,
                               reduce_dehn, words_equal)
from surfacewalk.group.ball import ResourceError
from surfacewalk.group.geometry import find_cut_points, geodesic_count, geodesics_between
from surfacewalk.group.io import IntegrityError, load_ball, save_ball

# growth series of Gamma_2 (Cannon): 1, 8, 56, 392, 2736, 19096, 133288
GAMMA2_SPHERES = [1, 8, 56, 392, 2736, 19096, 133288]

words = st.lists(st.integers(0, 7), max_size=12).map(tuple)


def test_parse_and_format_roundtrip(gamma2):
    w = gamma2.parse("a1 b1 A1 B1 a2 b2 A2 B2")
    assert w == gamma2.relator
    assert gamma2.parse(gamma2.format((0, 3, 6, 5))) == (0, 3, 6, 5)
    with pytest.raises(WordError):
        gamma2.parse("c1")


def test_inverse_is_xor_one():
    assert inverse_word((0, 2, 5)) == (4, 3, 1)
    assert free_reduce((0, 1, 2, 4, 5, 3)) == ()


def test_relator_is_identity(gamma2):
    assert is_identity(gamma2.relator, gamma2)
    assert is_identity(gamma2.relator[2:] + gamma2.relator[:2], gamma2)
    assert not is_identity(gamma2.relator[:7], gamma2)


def test_sphere_counts_surface(ball6):
    assert ball6.sphere_counts() == GAMMA2_SPHERES


def test_sphere_counts_free(free_ball6):
    assert free_ball6.sphere_counts() == [1] + [8 * 7 ** (m - 1) for m in range(1, 7)]


def test_lumped_counts_match(lumped6, ball6):
    assert lumped6.sphere_counts() == ball6.sphere_counts()
    assert lumped6.n_rows < ball6.n_rows / 10


def test_radial_tree_counts():
    b = radial_tree_ball(3, 5)
    assert b.sphere_counts() == [1, 12, 132, 1452, 15972, 175692]


def test_neighbour_table_symmetric(ball5):
    nbr = ball5.nbr
    inner = np.arange(ball5.sphere_ptr[ball5.radius])
    for a in range(8):
        assert np.all(nbr[nbr[inner, a], a ^ 1] == inner)


def test_neighbours_change_length_by_one(ball5):
    rs = ball5.row_sphere()
    inner = np.arange(ball5.sphere_ptr[ball5.radius])
    d = rs[ball5.nbr[inner]] - rs[inner][:, None]
    assert set(np.unique(d)) <= {-1, 1}      # the Cayley graph of Gamma_g is bipartite


def test_stored_words_are_geodesic(ball5):
    for row in range(0, ball5.n_rows, 97):
        w = ball5.word(row)
        assert len(w) == ball5.sphere_of(row)
        assert ball5.find(w) == row


def test_resource_guard(gamma2):
    with pytest.raises(ResourceError, match="largest feasible radius"):
        ball_enumerate(gamma2, 40)


@settings(max_examples=80, deadline=None)
@given(w=words)
def test_dehn_reduce_preserves_element(ball6, gamma2, w):
    d = dehn_reduce(w, gamma2)
    assert len(d) <= len(free_reduce(w))
    assert words_equal(d, w, gamma2)


@settings(max_examples=80, deadline=None)
@given(w=st.lists(st.integers(0, 7), max_size=6).map(tuple))
def test_normal_form_is_the_shortlex_geodesic(ball6, gamma2, w):
    nw = reduce_dehn(w, gamma2)
    row = ball6.find(w)
    assert ball6.find(nw.letters) == row
    assert nw.length == ball6.sphere_of(row)
    assert reduce_dehn(nw.letters, gamma2) == nw


@settings(max_examples=40, deadline=None)
@given(w=st.lists(st.integers(0, 7), min_size=1, max_size=6).map(tuple))
def test_geodesics_between_end_at_target(ball6, w):
    row = ball6.find(w)
    segs = geodesics_between(0, row, ball6)
    assert len(segs) == geodesic_count(ball6, row)
    for s in segs:
        assert ball6.find(s.letters) == row and len(s.letters) == ball6.sphere_of(row)


def test_cut_points_on_every_geodesic(ball6, gamma2):
    rng = np.random.default_rng(3)
    rows = rng.integers(ball6.sphere_ptr[5], ball6.sphere_ptr[6], 30)
    seen = 0
    for row in rows:
        segs = geodesics_between(0, int(row), ball6)
        vsets = [set(ball6.find(s.letters[:k]) for k in range(len(s.letters) + 1)) for s in segs]
        for bar in find_cut_points(segs[0], gamma2, ball6):
            x = ball6.find(segs[0].letters[:bar.index])
            assert all(x in vs for vs in vsets)
            seen += 1
    assert seen > 0


def test_cut_points_reject_non_geodesic(ball6, gamma2):
    with pytest.raises(WordError):
        find_cut_points((0, 1, 2), gamma2, ball6)


@pytest.mark.parametrize("lumped", [False, True])
def test_snapshot_roundtrip(tmp_path, gamma2, lumped):
    b = ball_enumerate(gamma2, 4, lumped=lumped)
    path = tmp_path / "b.npz"
    save_ball(b, path)
    c = load_ball(path)
    assert c.sphere_counts() == b.sphere_counts()
    assert np.array_equal(c.keys, b.keys)
    assert c.find((0, 2, 1)) == b.find((0, 2, 1))


def test_truncated_snapshot_is_rejected(tmp_path, gamma2):
    b = ball_enumerate(gamma2, 4)
    path = tmp_path / "b.npz"
    save_ball(b, path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(IntegrityError):
        load_ball(path)
