import math

import numpy as np
import pytest

from cmskit import dsl
from cmskit.errors import InvalidStochasticMatrix, SamplerExhausted, SemanticError, UnknownBuiltin
from cmskit.simulate import apply_U
from cmskit.system import EuclideanSystem, builtin, from_spec, parse_builtin_arg, validate

HALVED = """system halved
dim 1
metric l1
vertices 1
vertexset 1 = abs(x) >= 0
representative 1 = (1)
edge 0 : 1 -> 1 map ((1/2)*x) prob (1/6)*sin(x)^2 + 17/24
edge 1 : 1 -> 1 map (2*x) prob ((1/6)*cos(x)^2 + 1/8)/2
delta 1/16
rate 45/48
"""


def test_from_spec_shapes(r1, r2):
    assert isinstance(r2, EuclideanSystem)
    assert r2.graph.vertex_count == 2 and len(r2.graph.edges) == 4
    assert r1.graph.vertex_count == 1 and len(r1.graph.edges) == 2


def test_r1_probabilities_at_zero(r1):
    assert r1.prob("0", (0.0,)) == 17 / 24
    assert r1.prob("1", (0.0,)) == pytest.approx(7 / 24, abs=1e-16)


def test_r2_probabilities_at_rep(r2, oracles):
    p = dict(r2.edge_probs((0.0, 1.0)))
    assert p["e1"] == pytest.approx(oracles["example2_p_e1_at_0_1"], abs=1e-15)
    assert p["e2"] == pytest.approx(math.cos(1) ** 2 / 15 + 3 / 7, abs=1e-15)
    assert abs(p["e1"] + p["e2"] - 1) <= 1e-15


def test_gmarkov_shape(gm):
    assert gm.graph.vertex_count == 2 and len(gm.graph.edges) == 4
    assert gm.rate == 0.5 and gm.delta == 0.3


def test_gmarkov_rows_are_matrix_rows(gm):
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = gm.random_point(rng)
        v = gm.vertex_of(p)
        assert [q for _, q in gm.edge_probs(p)] == list(gm.matrix[v - 1])


def test_bad_matrices():
    with pytest.raises(InvalidStochasticMatrix):
        builtin("gmarkov", [[0.5, 0.4], [0.5, 0.5]])
    with pytest.raises(InvalidStochasticMatrix):
        builtin("gmarkov", [[1.0, 0.0], [0.5, 0.5]])
    with pytest.raises(InvalidStochasticMatrix):
        builtin("gmarkov", [0.5, 0.5, 0.5])
    with pytest.raises(UnknownBuiltin):
        builtin("lorenz")


def test_parse_builtin_arg():
    assert parse_builtin_arg("gmarkov:0.7,0.3,0.4,0.6").matrix.tolist() == [[0.7, 0.3], [0.4, 0.6]]
    assert parse_builtin_arg("example2").name == "example_r2"


def test_representative_violation():
    with pytest.raises(SemanticError):
        from_spec(dsl.parse_system(HALVED.replace("representative 1 = (1)", "representative 1 = (1)").replace("abs(x) >= 0", "x <= 0")))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_builtins_validate(builtins, seed):
    for name, sys in builtins.items():
        rep = validate(sys, 10_000, seed)
        assert rep.passed, (name, rep.to_dict())
        assert rep.max_sum_error <= 1e-12


def test_r1_floor(r1):
    rep = validate(r1, 10_000, 0)
    assert rep.min_prob_by_edge["1"] >= 1 / 8
    assert rep.min_prob_by_edge["0"] >= 17 / 24


def test_r2_edge_floors(r2):
    rep = validate(r2, 10_000, 0)
    assert rep.min_prob_by_edge["e2"] >= 3 / 7 and rep.min_prob_by_edge["e4"] >= 3 / 7
    assert rep.min_prob_by_edge["e1"] >= 53 / 105 and rep.min_prob_by_edge["e3"] >= 53 / 105


def test_halved_edge_fails():
    sys = from_spec(dsl.parse_system(HALVED))
    rep = validate(sys, 2000, 0)
    assert not rep.passed
    # the removed mass is (cos^2/6 + 1/8)/2, between 1/16 and 7/48
    assert 1 / 16 - 1e-12 <= rep.max_sum_error <= 7 / 48 + 1e-12


def test_sampler_exhausted():
    text = HALVED.replace("abs(x) >= 0", "x >= 1000").replace("(1)", "(1000)").replace("(1/2)*x", "x").replace("(2*x)", "(x)")
    sys = from_spec(dsl.parse_system(text))
    with pytest.raises(SamplerExhausted):
        validate(sys, 100, 0)


def test_r1_dirac_at_zero_invariant(r1):
    for f in (lambda x: 1.0, lambda x: x[0], lambda x: math.cos(x[0]) + 3):
        assert apply_U(r1, f, (0.0,)) == pytest.approx(f((0.0,)), abs=1e-15)


def test_maps_respect_targets(r2):
    rng = np.random.default_rng(3)
    for v in (1, 2):
        pts = r2.sample_vertex_points(v, 2000, rng)
        for e in r2.out_edges(v):
            assert r2.contains_batch(e.target, r2.apply_batch(e.id, pts)).all()
