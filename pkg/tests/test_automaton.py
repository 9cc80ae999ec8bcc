import json

import numpy as np
import pytest

from surfacewalk.automaton import (ValidationError, check_axioms, free_automaton, growth,
                                   recurrent_class, transient_prefix_bound, validate_bijection,
                                   validate_counts)


def test_free_automaton_counts():
    aut = free_automaton(2)
    assert aut.n_states == 9
    assert aut.path_counts(5) == [1, 8, 56, 392, 2744, 19208]
    rec = recurrent_class(aut)
    assert len(rec.recurrent) == 8
    assert abs(np.exp(rec.entropy) - 7) < 1e-12


def test_surface_automaton_shape(aut2):
    assert aut2.n_states == 36
    check_axioms(aut2)
    rec = recurrent_class(aut2)
    assert len(rec.recurrent) == 35 and rec.n_recurrent_classes == 1


def test_surface_automaton_bijection(aut2, ball5):
    # accepted words of length m are exactly the ShortLex geodesics of S_m
    for m in range(5):
        assert validate_bijection(aut2, ball5, m)


def test_accepted_words_are_geodesic(aut2, ball6):
    rng = np.random.default_rng(0)
    for _ in range(200):
        w = aut2.random_path(6, rng)
        row = ball6.find(w)
        assert ball6.sphere_of(row) == len(w)


def test_wrong_counts_rejected(aut2):
    with pytest.raises(ValidationError):
        validate_counts(aut2, 3, [1, 8, 56, 393])


def test_growth_rate(aut2, lumped6):
    gr = growth(aut2, 6, lumped6.sphere_counts())
    # Cannon's growth series for Gamma_2: ratio tends to about 6.9798
    assert abs(gr.zeta - 6.97984) < 1e-4
    assert 6.9 < gr.ratios[-1] < 7.0


def test_transient_prefix_bound(aut2):
    bound, nT = transient_prefix_bound(aut2)
    assert nT == 1 and bound >= 1


def test_json_and_dot_export(aut2):
    d = json.loads(aut2.to_json())
    assert d["group"] == "surface2" and d["states"] == 36
    assert len(d["edges"]) == int((aut2.trans >= 0).sum())
    dot = aut2.to_dot()
    assert dot.startswith("digraph") and dot.count("->") == len(d["edges"]) + 1
