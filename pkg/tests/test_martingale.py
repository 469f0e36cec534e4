import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmskit.errors import InadmissibleWord, MissingModulus, VertexMismatch
from cmskit.martingale import (
    _ratio,
    coupled_run,
    likelihood_path,
    martingale_check_exact,
    tail_bound_check,
    ui_table,
    variance_bound_check,
    y_martingale_check_exact,
)
from cmskit.simulate import cylinder_prob

X0, Y0 = (0.0, 1.0), (1.0, 2.0)


def test_ratio_convention():
    assert _ratio(0.0, 0.0) == 0.0
    assert _ratio(1.0, 0.0) == math.inf
    assert _ratio(1.0, 4.0) == 0.25


def test_likelihood_path_matches_cylinders(r2):
    word = ("e1", "e3", "e2", "e1", "e4")
    path = likelihood_path(r2, X0, Y0, word)
    for k in range(len(word) + 1):
        ratio = cylinder_prob(r2, Y0, word[:k]) / cylinder_prob(r2, X0, word[:k])
        assert path.X[k] == pytest.approx(ratio, rel=1e-12)
    assert len(list(path.rows())) == 5


def test_likelihood_path_errors(r2):
    with pytest.raises(VertexMismatch):
        likelihood_path(r2, X0, (0.0, -1.0), ("e1",))
    with pytest.raises(InadmissibleWord):
        likelihood_path(r2, X0, Y0, ("e3",))


def test_r1_first_ratio(r1, oracles):
    path = likelihood_path(r1, (0.0,), (math.pi / 2,), ("0",))
    assert path.X[1] == pytest.approx(oracles["example_r1_X1_ratio"], rel=1e-12)


@pytest.mark.parametrize("n", range(0, 5))
def test_martingale_exact(r2, n):
    chk = martingale_check_exact(r2, X0, Y0, n)
    assert chk.max_discrepancy <= 1e-12
    assert chk.total_mass == pytest.approx(1.0, abs=1e-12)
    assert y_martingale_check_exact(r2, X0, Y0, n).max_discrepancy <= 1e-12


def test_martingale_exact_sequence(gm):
    x = gm.representative(1)
    y = x.append("21").append("11")
    assert martingale_check_exact(gm, x, y, 4).max_discrepancy <= 1e-12
    assert y_martingale_check_exact(gm, x, y, 4).max_discrepancy <= 1e-12


@given(st.lists(st.integers(0, 1), min_size=1, max_size=40),
       st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=100, deadline=None)
def test_log_bound_r2(choices, a, b):
    # walk the graph of example_r2 using the choices, from two points of K_1 (y >= 1)
    from cmskit.system import builtin
    sys = builtin("example_r2")
    x, y = (a, abs(b) + 1.5), (b, abs(a) + 1.0)
    v, word = 1, []
    for c in choices:
        outs = sys.out_edges(v)
        e = outs[c % len(outs)]
        word.append(e.id)
        v = e.target
    gap = likelihood_path(sys, x, y, word).log_bound_gap()
    assert np.all(gap >= -1e-12)


def test_coupled_run_shapes(r2):
    run = coupled_run(r2, X0, Y0, 6, 50, seed=1)
    assert run.px.shape == (6, 50) and run.dist.shape == (7, 50)
    assert np.allclose(run.dist[0], r2.distance(X0, Y0))
    assert np.all((run.px > 0) & (run.py > 0))


def test_tail_bound(r2):
    rep = tail_bound_check(r2, X0, Y0, 10, 5000, seed=2)
    assert rep.violations == 0
    assert [r.i for r in rep.rows] == list(range(1, 11))


def test_variance_bound(r2):
    rep = variance_bound_check(r2, X0, Y0, 10, 2000, seed=3)
    assert rep.holds and rep.estimate <= rep.bound


def test_variance_needs_envelope(gm):
    x = gm.representative(1)
    if gm.envelope is None:
        with pytest.raises(MissingModulus):
            variance_bound_check(gm, x, x, 3, 10)
    else:
        assert variance_bound_check(gm, x, x.append("11"), 3, 200).holds


def test_ui_table_monotone(r2):
    t = ui_table(r2, X0, Y0, 20, mc_budget=2000, seed=4)
    assert t.nonincreasing
    assert all(0 <= s <= 1 for s in t.sup_tail)


@pytest.mark.parametrize("envelope", [None, lambda t: t / 3])
def test_variance_bound_r1(r1, envelope):
    rep = variance_bound_check(r1, (0.0,), (0.1,), 50, 100_000, seed=0, envelope=envelope)
    assert rep.estimate <= rep.bound + 3 * rep.std_error
