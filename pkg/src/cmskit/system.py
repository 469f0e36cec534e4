"""Runtime Markov systems (K_{i(e)}, w_e, p_e) and the bundled examples."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import dsl
from .errors import (InvalidStochasticMatrix, OrphanPoint, SamplerExhausted,
                     SemanticError, UnknownBuiltin)
from .graph import DirectedMultigraph, Edge
from .rng import generator
from .space import Metric, SequencePoint, distance

DEFAULT_BOX = 10.0


class MarkovSystem:
    """Common interface. Subclasses define membership, maps and probabilities."""

    kind: str = "abstract"

    def __init__(self, graph: DirectedMultigraph, metric: Metric, representatives: dict,
                 delta: float, rate: Optional[float] = None, name: str = "system",
                 identity: Optional[str] = None, edge_floors: Optional[dict] = None,
                 envelope: Optional[Callable[[float], float]] = None):
        self.graph = graph
        self.metric = Metric.parse(metric)
        self.representatives = dict(representatives)
        self.delta = float(delta)
        self.rate = None if rate is None else float(rate)
        self.name = name
        self.identity = identity or name
        self.edge_floors = dict(edge_floors) if edge_floors else {}
        # upper envelope t -> bound on the modulus of continuity of every p_e on K_{i(e)}
        self.envelope = envelope

    # subclasses implement these
    def contains(self, vertex: int, x) -> bool:
        raise NotImplementedError

    def prob(self, edge_id: str, x) -> float:
        raise NotImplementedError

    def apply(self, edge_id: str, x):
        raise NotImplementedError

    def sample_vertex_points(self, vertex: int, budget: int, rng: np.random.Generator) -> list:
        raise NotImplementedError

    def vertex_of(self, x) -> Optional[int]:
        for v in self.graph.vertices:
            if self.contains(v, x):
                return v
        return None

    def require_vertex(self, x) -> int:
        v = self.vertex_of(x)
        if v is None:
            raise OrphanPoint(f"{x!r} lies in no vertex set")
        return v

    def out_edges(self, vertex: int) -> tuple[Edge, ...]:
        return self.graph.out_edges(vertex)

    def edge_probs(self, x, vertex: Optional[int] = None) -> list[tuple[str, float]]:
        """[(e, p_e(x)) for e with i(e) = vertex(x)] in declared order."""
        if vertex is None:
            vertex = self.require_vertex(x)
        return [(e.id, self.prob(e.id, x)) for e in self.out_edges(vertex)]

    def distance(self, x, y) -> float:
        return distance(self.metric, x, y)

    def representative(self, vertex: int):
        return self.representatives[vertex]

    def __repr__(self):
        return (f"{type(self).__name__}({self.name!r}, vertices={self.graph.vertex_count}, "
                f"edges={len(self.graph.edges)}, metric={self.metric.value})")


class EuclideanSystem(MarkovSystem):
    """A system on R^d whose maps and probabilities are DSL expressions."""

    kind = "euclidean"

    def __init__(self, spec: dsl.SystemSpec, name: Optional[str] = None, box: float = DEFAULT_BOX, **kw):
        graph = dsl.spec_graph(spec)
        identity = kw.pop("identity", None)
        if identity is None and spec.source_text is not None:
            identity = f"{spec.name}:sha256:{hashlib.sha256(spec.source_text.encode()).hexdigest()[:16]}"
        super().__init__(graph, Metric.parse(spec.metric), spec.representatives, spec.delta,
                         spec.rate, name or spec.name, identity, **kw)
        self.spec = spec
        self.dim = spec.dim
        self.box = box
        self._member = {v: dsl.compile_predicate(p) for v, p in spec.vertexsets.items()}
        self._member_vec = {v: dsl.compile_predicate(p, vector=True) for v, p in spec.vertexsets.items()}
        self._prob = {e.id: dsl.compile_scalar(e.prob) for e in spec.edges}
        self._prob_vec = {e.id: dsl.compile_vector(e.prob) for e in spec.edges}
        self._map = {e.id: tuple(dsl.compile_scalar(c) for c in e.map) for e in spec.edges}
        self._map_vec = {e.id: tuple(dsl.compile_vector(c) for c in e.map) for e in spec.edges}

    def contains(self, vertex, x) -> bool:
        if isinstance(x, SequencePoint) or len(x) != self.dim:
            return False
        return bool(self._member[vertex](x))

    def prob(self, edge_id, x) -> float:
        return self._prob[edge_id](x)

    def apply(self, edge_id, x) -> tuple:
        return tuple(c(x) for c in self._map[edge_id])

    # batched forms on (m, d) arrays
    def contains_batch(self, vertex, X) -> np.ndarray:
        return np.asarray(self._member_vec[vertex](X), dtype=bool)

    def vertex_batch(self, X) -> np.ndarray:
        out = np.zeros(len(X), dtype=np.int64)
        for v in self.graph.vertices:
            hit = (out == 0) & self.contains_batch(v, X)
            out[hit] = v
        return out

    def prob_batch(self, edge_id, X) -> np.ndarray:
        return self._prob_vec[edge_id](X)

    def apply_batch(self, edge_id, X) -> np.ndarray:
        return np.column_stack([c(X) for c in self._map_vec[edge_id]])

    def sample_vertex_points(self, vertex, budget, rng, extras: bool = True):
        """Rejection sample the box [-R, R]^d; `extras` also offers the representative and origin."""
        cand = rng.uniform(-self.box, self.box, size=(budget, self.dim))
        if extras:
            fixed = [np.asarray(self.representatives[vertex], float), np.zeros(self.dim)]
            cand = np.vstack([np.array(fixed), cand])
        return cand[self.contains_batch(vertex, cand)]


class SequenceSystem(MarkovSystem):
    """A system on one-sided sequences (..., s_{-1}, s_0) whose maps append a symbol.

    K_i holds the sequences with t(s_0) = i. `prob_fn(edge_id, point)` gives p_e.
    """

    kind = "sequence"

    def __init__(self, graph: DirectedMultigraph, prob_fn: Callable, delta: float,
                 name: str = "sequence", anchors: Optional[dict] = None, **kw):
        anchors = anchors or {v: graph.shortest_cycle(v) for v in graph.vertices}
        for v, a in anchors.items():
            if not a:
                raise SemanticError(f"vertex {v} lies on no cycle; no anchor available")
        reps = {v: SequencePoint((), anchors[v]) for v in graph.vertices}
        kw.setdefault("rate", 0.5)
        super().__init__(graph, Metric.SEQ2K, reps, delta, name=name, **kw)
        self.anchors = anchors
        self._prob_fn = prob_fn

    def contains(self, vertex, x) -> bool:
        return isinstance(x, SequencePoint) and self.graph.target(x.last) == vertex

    def vertex_of(self, x):
        if not isinstance(x, SequencePoint):
            return None
        return self.graph.target(x.last)

    def prob(self, edge_id, x) -> float:
        return self._prob_fn(edge_id, x)

    def apply(self, edge_id, x) -> SequencePoint:
        return x.append(edge_id)

    def random_point(self, rng, depth: int = 64, vertex: Optional[int] = None) -> SequencePoint:
        """Random admissible word of `depth` symbols over a uniformly chosen anchor cycle."""
        vs = list(self.graph.vertices)
        u = rng.random(depth + 1)
        v = vs[int(u[0] * len(vs))]
        anchor = self.anchors[v]
        out = self.graph.out_edges
        word = []
        for k in range(depth):
            outs = out(v)
            if vertex is not None and k == depth - 1:
                outs = [e for e in outs if e.target == vertex] or outs
            e = outs[int(u[k + 1] * len(outs))]
            word.append(e.id)
            v = e.target
        return SequencePoint(word, anchor)

    def sample_vertex_points(self, vertex, budget, rng, extras: bool = True):
        """Random depth-64 words over uniform anchors, kept when they end in K_vertex."""
        pts = [self.random_point(rng) for _ in range(budget)]
        return [p for p in pts if self.vertex_of(p) == vertex]


# --- construction ------------------------------------------------------------

def from_spec(spec: dsl.SystemSpec, **kw) -> EuclideanSystem:
    return EuclideanSystem(spec, **kw)


def load_system(path, **kw) -> EuclideanSystem:
    return from_spec(dsl.parse_system(Path(path).read_text(encoding="utf-8")), **kw)


def _bundled(name: str) -> str:
    return resources.files("cmskit").joinpath("data", name).read_text(encoding="utf-8")


def _envelope(slope: float, cap: float) -> Callable[[float], float]:
    return lambda t: min(slope * t, cap)


def gmarkov(P) -> SequenceSystem:
    """Full shift over vertices 1..n; e = (i -> j) appends e, p_e = P[i, j] constant."""
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        n = int(round(math.sqrt(P.size)))
        if n * n != P.size:
            raise InvalidStochasticMatrix(f"{P.size} entries do not form a square matrix")
        P = P.reshape(n, n)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
        raise InvalidStochasticMatrix("P must be a square matrix")
    if np.any(P <= 0):
        raise InvalidStochasticMatrix("entries must be strictly positive (probabilities bounded away from zero)")
    sums = P.sum(axis=1)
    if np.any(np.abs(sums - 1) > 1e-12):
        raise InvalidStochasticMatrix(f"rows must sum to 1, got {sums.tolist()}")
    n = P.shape[0]
    sep = "" if n <= 9 else "."
    ids = {(i, j): f"{i}{sep}{j}" for i in range(1, n + 1) for j in range(1, n + 1)}
    graph = DirectedMultigraph(n, tuple(Edge(ids[i, j], i, j) for (i, j) in ids))
    table = {ids[i, j]: float(P[i - 1, j - 1]) for (i, j) in ids}
    anchors = {i: (ids[i, i],) for i in range(1, n + 1)}
    sys = SequenceSystem(
        graph, lambda e, x: table[e], delta=float(P.min()), name="gmarkov",
        identity="gmarkov:" + ",".join(repr(v) for v in P.ravel().tolist()),
        anchors=anchors, edge_floors=dict(table), envelope=lambda t: 0.0,
    )
    sys.matrix = P
    return sys


def builtin(name: str, params=None) -> MarkovSystem:
    """Bundled systems: example_r2 (alias example2), example_r1, gmarkov(P)."""
    if name in ("example_r2", "example2"):
        spec = dsl.parse_system(_bundled("example2.cms"))
        return EuclideanSystem(
            spec, name="example_r2", identity="builtin:example_r2",
            edge_floors={"e1": 53 / 105, "e2": 3 / 7, "e3": 53 / 105, "e4": 3 / 7},
            envelope=_envelope(1 / 15, 1 / 15),
        )
    if name == "example_r1":
        spec = dsl.parse_system(_bundled("example_r1.cms"))
        return EuclideanSystem(
            spec, name="example_r1", identity="builtin:example_r1",
            edge_floors={"0": 17 / 24, "1": 1 / 8},
            envelope=_envelope(1 / 6, 1 / 6),
        )
    if name == "gmarkov":
        if params is None:
            raise InvalidStochasticMatrix("gmarkov needs a stochastic matrix P")
        return gmarkov(params)
    raise UnknownBuiltin(f"unknown builtin {name!r}; known: example_r2, example_r1, gmarkov")


def parse_builtin_arg(arg: str) -> MarkovSystem:
    """CLI form NAME[:p11,p12,...]."""
    name, _, rest = arg.partition(":")
    params = [float(v) for v in rest.split(",")] if rest else None
    return builtin(name, params)


# --- validation --------------------------------------------------------------

@dataclass
class ValidationReport:
    max_sum_error: float
    min_prob: float
    min_prob_by_edge: dict
    negative_probs: int
    below_delta: int
    below_floor: dict
    target_violations: int
    samples_by_vertex: dict
    passed: bool = field(init=False)
    sum_tol: float = 1e-12

    def __post_init__(self):
        self.passed = (self.max_sum_error <= self.sum_tol and self.below_delta == 0
                       and self.negative_probs == 0 and self.target_violations == 0
                       and not any(self.below_floor.values()))

    def to_dict(self):
        return {
            "passed": self.passed, "max_sum_error": self.max_sum_error, "min_prob": self.min_prob,
            "min_prob_by_edge": self.min_prob_by_edge, "negative_probs": self.negative_probs,
            "below_delta": self.below_delta, "below_floor": self.below_floor,
            "target_violations": self.target_violations,
            "samples_by_vertex": {str(k): v for k, v in self.samples_by_vertex.items()},
            "sum_tolerance": self.sum_tol,
        }


def validate(sys: MarkovSystem, sample_budget: int = 10_000, seed: int = 0) -> ValidationReport:
    """Check the probability axioms and w_e(K_{i(e)}) in K_{t(e)} on sampled states."""
    if sample_budget < 1:
        raise ValueError("sample_budget must be >= 1")
    rng = generator(seed, 0xC0FFEE)
    max_err, min_p = 0.0, math.inf
    min_by_edge = {e.id: math.inf for e in sys.graph.edges}
    negatives = below = violations = 0
    counts = {}
    for v in sys.graph.vertices:
        pts = sys.sample_vertex_points(v, sample_budget, rng, extras=False)
        if len(pts) == 0:
            raise SamplerExhausted(f"no point of K_{v} found within {sample_budget} draws")
        if isinstance(sys, EuclideanSystem):
            pts = np.vstack([np.asarray(sys.representative(v), float)[None, :], pts])
        counts[v] = len(pts)
        outs = sys.out_edges(v)
        if isinstance(sys, EuclideanSystem):
            probs = np.column_stack([sys.prob_batch(e.id, pts) for e in outs])
            for k, e in enumerate(outs):
                img = sys.apply_batch(e.id, pts)
                violations += int(np.count_nonzero(~sys.contains_batch(e.target, img)))
        else:
            probs = np.array([[sys.prob(e.id, x) for e in outs] for x in pts])
            for e in outs:
                violations += sum(not sys.contains(e.target, sys.apply(e.id, x)) for x in pts)
        max_err = max(max_err, float(np.max(np.abs(probs.sum(axis=1) - 1.0))))
        min_p = min(min_p, float(probs.min()))
        negatives += int(np.count_nonzero(probs < 0))
        below += int(np.count_nonzero(probs < sys.delta))
        for k, e in enumerate(outs):
            min_by_edge[e.id] = min(min_by_edge[e.id], float(probs[:, k].min()))
    below_floor = {e: int(min_by_edge[e] < f) for e, f in sys.edge_floors.items()}
    return ValidationReport(max_err, min_p, min_by_edge, negatives, below, below_floor, violations, counts)
