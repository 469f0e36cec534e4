import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmskit.coding import (
    BackwardWord,
    code_batch,
    code_word,
    coding_convergence,
    energy_u,
    holder_fit,
    perturbed_starts,
    sample_words,
    y_drift,
)
from cmskit.errors import InadmissibleWord, WrongAlphabet
from cmskit.space import SequencePoint


def test_backward_word_checks(r2):
    assert BackwardWord(("e1", "e3")).check(r2).source_vertex(r2) == 1
    with pytest.raises(InadmissibleWord):
        BackwardWord(("e1", "e1")).check(r2)
    with pytest.raises(InadmissibleWord):
        BackwardWord(())


def test_code_word_order(r2):
    # oldest edge acts first
    x = r2.representative(1)
    manual = r2.apply("e3", r2.apply("e1", x))
    assert code_word(r2, ("e1", "e3")) == manual


def test_code_word_sequence(gm):
    p = code_word(gm, ("11", "12", "22"))
    assert p == SequencePoint(("11", "12", "22"), gm.representative(1).anchor)


def test_code_batch_matches_scalar(r2):
    W = sample_words(r2, 12, 20, seed=1, burnin=50)
    X = code_batch(r2, W, r2.representatives)
    ids = r2.graph.edge_ids
    for row, x in zip(W, X):
        assert np.allclose(x, code_word(r2, [ids[k] for k in row]), atol=1e-12)


def test_sampled_words_are_admissible(builtins):
    for sys in builtins.values():
        W = sample_words(sys, 15, 10, seed=2, burnin=20)
        ids = sys.graph.edge_ids
        for row in W:
            assert sys.graph.is_admissible([ids[k] for k in row])


def test_sample_words_reproducible(gm):
    a = sample_words(gm, 10, 5, seed=9, burnin=10)
    b = sample_words(gm, 10, 5, seed=9, burnin=10)
    assert np.array_equal(a, b)


def test_perturbed_starts_in_vertex_sets(builtins):
    for sys in builtins.values():
        for v, p in perturbed_starts(sys, seed=0).items():
            assert sys.vertex_of(p) == v


def test_gmarkov_successive_law(gm):
    # depth m and m+1 codes differ exactly when the (m+1)-th newest edge is not the anchor loop
    rep = coding_convergence(gm, seed=3, depth_grid=(1, 2, 4, 7), words=100, burnin=50)
    W = sample_words(gm, 8, 100, seed=3, burnin=50)
    ids = gm.graph.edge_ids
    loops = {e.id for e in gm.graph.edges if e.source == e.target}
    for m in rep.depths:
        col = W[:, 8 - m - 1]
        expected = np.array([0.0 if ids[k] in loops else 2.0 ** -m for k in col])
        assert np.array_equal(rep.successive[m], expected)


def test_r2_coding_contracts(r2):
    rep = coding_convergence(r2, seed=0, depth_grid=(5, 400), words=200, burnin=100)
    first, last = rep.stats
    assert last.successive_median < first.successive_median
    assert last.start_p90 < 1e-3
    assert rep.to_dict()["depths"][1]["depth"] == 400


def test_depth_grid_validation(r2):
    with pytest.raises(ValueError):
        coding_convergence(r2, depth_grid=(10, 5))
    with pytest.raises(ValueError):
        coding_convergence(r2, depth_grid=())


def test_holder_fit_runs(r2):
    fit = holder_fit(r2, seed=1, depth=300, pairs=80)
    assert fit.pairs_used + fit.pairs_discarded == 80
    assert math.isfinite(fit.alpha) and fit.alpha > 0
    assert 0.9 <= fit.fraction_within <= 1.0


def test_energy_u(r2):
    x = code_word(r2, ("e2", "e1"))
    assert energy_u(r2, ("e2", "e1"), "e3") == pytest.approx(math.log(r2.prob("e3", x)))
    with pytest.raises(InadmissibleWord):
        energy_u(r2, ("e2", "e1"), "e2")


def test_y_drift_known():
    assert y_drift("1101") == [1, 0, 1, 2]
    with pytest.raises(WrongAlphabet):
        y_drift(["1", "2"])


@given(st.lists(st.sampled_from("01"), min_size=1, max_size=50))
@settings(max_examples=100, deadline=None)
def test_y_drift_final_value(word):
    d = y_drift(word)
    assert d[-1] == word.count("1") - word.count("0")
    assert all(abs(b - a) == 1 for a, b in zip([0] + d, d))
