"""The Markov chain generated by a system: steps, trajectories, P_x cylinders and U."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from . import dsl
from .errors import CapExceeded, OrphanPoint
from .rng import Stream, generator
from .space import SequencePoint
from .system import EuclideanSystem, MarkovSystem

DEFAULT_CAP = 10_000_000
DEFAULT_CLIP = 1e12


class ClippingWarning(RuntimeWarning):
    """A test function exceeded the clipping bound and was truncated."""


# --- observables -------------------------------------------------------------

class Observable:
    """A real function on states with a scalar and a batched form.

    Built from a DSL expression string (vectorized) or any Python callable.
    Values are clipped to [-clip, clip]; clipping raises a ClippingWarning.
    """

    def __init__(self, scalar: Callable, batch: Optional[Callable] = None,
                 clip: float = DEFAULT_CLIP, name: str = "f"):
        self._scalar = scalar
        self._batch = batch
        self.clip = clip
        self.name = name

    def __call__(self, x) -> float:
        v = self._scalar(x)
        if abs(v) > self.clip:
            warnings.warn(f"{self.name}: |value| {abs(v):.3g} clipped to {self.clip:g}", ClippingWarning)
            v = math.copysign(self.clip, v)
        return v

    def batch(self, X) -> np.ndarray:
        if self._batch is not None:
            vals = np.asarray(self._batch(X), dtype=float)
        else:
            rows = X if not isinstance(X, np.ndarray) else [tuple(r) for r in X]
            vals = np.array([self._scalar(x) for x in rows], dtype=float)
        over = np.abs(vals) > self.clip
        if np.any(over):
            warnings.warn(f"{self.name}: {int(over.sum())} values clipped to {self.clip:g}", ClippingWarning)
            vals = np.clip(vals, -self.clip, self.clip)
        return vals


def observable(sys: MarkovSystem, f, clip: float = DEFAULT_CLIP) -> Observable:
    if isinstance(f, Observable):
        return f
    if isinstance(f, str):
        if not isinstance(sys, EuclideanSystem):
            raise TypeError("expression observables need a euclidean system")
        node = dsl.parse_expr(f, sys.dim)
        return Observable(dsl.compile_scalar(node), dsl.compile_vector(node), clip, name=f)
    if isinstance(f, (int, float)):
        c = float(f)
        return Observable(lambda x: c, lambda X: np.full(len(X), c), clip, name=str(c))
    return Observable(f, getattr(f, "batch", None), clip, name=getattr(f, "__name__", "f"))


# --- single chain --------------------------------------------------------------

def choose_edge(probs: Sequence[tuple[str, float]], u: float) -> str:
    """Inverse CDF over the declared edge order; the last cumulative value is taken as 1."""
    acc = 0.0
    for e, p in probs[:-1]:
        acc += p
        if u < acc:
            return e
    return probs[-1][0]


def step(sys: MarkovSystem, x, rng) -> tuple[str, object]:
    """One transition from x. `rng` is a Stream or an explicit uniform in [0, 1)."""
    v = sys.vertex_of(x)
    if v is None:
        raise OrphanPoint(f"{x!r} lies in no vertex set")
    u = rng if isinstance(rng, float) else rng.uniform()
    e = choose_edge(sys.edge_probs(x, v), u)
    return e, sys.apply(e, x)


@dataclass
class Trajectory:
    start: object
    word: list
    points: list
    master_seed: int
    stream_id: int
    vertices: list = field(default_factory=list)

    def __len__(self):
        return len(self.word)

    def to_json(self) -> dict:
        def enc(p):
            return p.to_json() if isinstance(p, SequencePoint) else list(p)
        return {"master_seed": self.master_seed, "stream_id": self.stream_id,
                "word": list(self.word), "points": [enc(p) for p in self.points]}

    def csv_rows(self):
        """Rows (step, edge, coords...) ; step 0 has an empty edge."""
        for k, p in enumerate(self.points):
            edge = self.word[k - 1] if k > 0 else ""
            coords = [" ".join(p.word)] if isinstance(p, SequencePoint) else list(p)
            yield [self.master_seed, self.stream_id, k, edge, *coords]


def iter_chain(sys: MarkovSystem, x0, n: int, stream: Stream) -> Iterator[tuple]:
    """Yield (vertex, edge, p_edge(x), all edge probs at x, x, next_x) for n steps."""
    x = x0
    v = sys.require_vertex(x0)
    graph = sys.graph
    for _ in range(n):
        probs = sys.edge_probs(x, v)
        e = choose_edge(probs, stream.uniform())
        p = next(q for f, q in probs if f == e)
        y = sys.apply(e, x)
        yield v, e, p, probs, x, y
        x = y
        v = graph.target(e)


def run(sys: MarkovSystem, x0, n: int, master_seed: int = 0, stream_id: int = 0) -> Trajectory:
    if n < 0:
        raise ValueError("n must be >= 0")
    stream = Stream(master_seed, stream_id)
    traj = Trajectory(x0, [], [x0], master_seed, stream_id, [sys.require_vertex(x0)])
    for v, e, p, probs, x, y in iter_chain(sys, x0, n, stream):
        traj.word.append(e)
        traj.points.append(y)
        traj.vertices.append(sys.graph.target(e))
    return traj


# --- exact path-space quantities -------------------------------------------------

def cylinder_prob(sys: MarkovSystem, x, word: Sequence[str]) -> float:
    """P_x(_1[e_1..e_k]) = p_{e_1}(x) p_{e_2}(w_{e_1} x) ...; 0 if inadmissible from x."""
    if not word:
        return 1.0
    v = sys.vertex_of(x)
    if v is None or not sys.graph.is_admissible(word, v):
        return 0.0
    prob = 1.0
    for e in word:
        prob *= sys.prob(e, x)
        x = sys.apply(e, x)
    return prob


def cylinder_prob_batch(sys: MarkovSystem, X, word: Sequence[str], vertices=None) -> np.ndarray:
    """cylinder_prob for many starting states (array rows or a list of points)."""
    m = len(X)
    if not word:
        return np.ones(m)
    if not isinstance(sys, EuclideanSystem):
        return np.array([cylinder_prob(sys, x, word) for x in X])
    X = np.asarray(X, dtype=float)
    if vertices is None:
        vertices = sys.vertex_batch(X)
    g = sys.graph
    if not g.is_admissible(word):
        return np.zeros(m)
    ok = np.asarray(vertices) == g.source(word[0])
    out = np.zeros(m)
    Y = X[ok]
    prob = np.ones(len(Y))
    for e in word:
        prob = prob * sys.prob_batch(e, Y)
        Y = sys.apply_batch(e, Y)
    out[ok] = prob
    return out


def apply_U(sys: MarkovSystem, f, x) -> float:
    """Uf(x) = sum over e with i(e) = vertex(x) of p_e(x) f(w_e x)."""
    f = observable(sys, f)
    return math.fsum(p * f(sys.apply(e, x)) for e, p in sys.edge_probs(x))


def _enumerate(sys: MarkovSystem, x, n: int, visit: Callable[[int, float, object], None]):
    """Depth-first walk over all admissible words of length <= n from x."""
    v0 = sys.require_vertex(x)

    def walk(y, v, prob, depth):
        if depth == n:
            return
        for e in sys.out_edges(v):
            q = prob * sys.prob(e.id, y)
            z = sys.apply(e.id, y)
            visit(depth + 1, q, z)
            walk(z, e.target, q, depth + 1)

    walk(x, v0, 1.0, 0)


def _check_cap(sys: MarkovSystem, x, n: int, cap: int, cumulative: bool):
    v = sys.require_vertex(x)
    terms = sum(sys.graph.count_words(k, v) for k in range(1, n + 1)) if cumulative \
        else sys.graph.count_words(n, v)
    if terms > cap:
        raise CapExceeded(f"{terms} enumeration terms exceed the cap {cap}")


def iterate_U_exact(sys: MarkovSystem, f, x, n: int, cap: int = DEFAULT_CAP) -> float:
    """U^n f(x) by full enumeration of the admissible words of length n."""
    f = observable(sys, f)
    if n == 0:
        return f(x)
    _check_cap(sys, x, n, cap, cumulative=True)
    terms = []
    _enumerate(sys, x, n, lambda d, q, z: terms.append(q * f(z)) if d == n else None)
    return math.fsum(terms)


@dataclass
class EstimateWithError:
    value: float
    std_error: float
    n: int
    master_seed: Optional[int] = None
    stream_id: Optional[int] = None
    note: str = ""

    def to_dict(self):
        return {"value": self.value, "std_error": self.std_error, "n": self.n,
                "master_seed": self.master_seed, "stream_id": self.stream_id, "note": self.note}


def cesaro_U(sys: MarkovSystem, f, x, n: int, mode: str = "exact", trajectories: int = 100_000,
             seed: int = 0, stream_id: int = 0, cap: int = DEFAULT_CAP) -> EstimateWithError:
    """(1/n) sum_{k=1..n} U^k f(x), by enumeration or Monte Carlo."""
    f = observable(sys, f)
    if n < 1:
        raise ValueError("n must be >= 1")
    if mode == "exact":
        _check_cap(sys, x, n, cap, cumulative=True)
        terms = []
        _enumerate(sys, x, n, lambda d, q, z: terms.append(q * f(z)))
        return EstimateWithError(math.fsum(terms) / n, 0.0, n, note="exact enumeration")
    if mode != "mc":
        raise ValueError("mode must be 'exact' or 'mc'")
    acc = np.zeros(trajectories)
    for k, states, _ in iter_batch(sys, x, trajectories, n, seed, stream_id):
        if k > 0:
            acc += f.batch(states)
    vals = acc / n
    return EstimateWithError(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trajectories)),
                      trajectories, seed, stream_id, "Monte Carlo over independent trajectories")


def iterate_U_mc(sys: MarkovSystem, f, x, n: int, trajectories: int = 100_000,
                 seed: int = 0, stream_id: int = 0) -> EstimateWithError:
    """Monte Carlo estimate of U^n f(x) = E_x f(X_n)."""
    f = observable(sys, f)
    last = None
    for k, states, _ in iter_batch(sys, x, trajectories, n, seed, stream_id):
        last = states
    vals = f.batch(last)
    return EstimateWithError(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trajectories)),
                      trajectories, seed, stream_id)


# --- many chains at once -----------------------------------------------------------

def _choose_batch(P: np.ndarray, U: np.ndarray) -> np.ndarray:
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    return np.minimum((U[:, None] >= cum).sum(axis=1), P.shape[1] - 1)


def iter_batch(sys: MarkovSystem, x0, m: int, n: int, seed: int = 0, stream_id: int = 0,
               driver=None):
    """Run m independent chains from x0 (one state or m states) for n steps.

    Yields (k, states, edges) for k = 0..n, where `edges` holds the global edge
    indices taken at step k (None at k = 0). Uniforms come from one stream, drawn
    step-major: the k-th call to Generator.random(m) drives step k.

    `driver`, when given, is a second batch of states whose probabilities choose
    the edges; both batches then move along the same edges and the driver batch is
    yielded as a fourth element.
    """
    gen = generator(seed, stream_id)
    g = sys.graph
    index = g.edge_index
    euclid = isinstance(sys, EuclideanSystem)

    def init(x):
        if euclid:
            X = np.asarray(x, dtype=float)
            X = np.repeat(X[None, :], m, axis=0) if X.ndim == 1 else X.copy()
            return X, sys.vertex_batch(X)
        pts = list(x) if isinstance(x, (list, tuple)) and x and isinstance(x[0], SequencePoint) else [x] * m
        return pts, np.array([sys.require_vertex(p) for p in pts])

    X, V = init(x0)
    if driver is not None:
        D, _ = init(driver)
    if np.any(V == 0):
        raise OrphanPoint("a start state lies in no vertex set")
    yield (0, X, None) if driver is None else (0, X, None, D)
    for k in range(1, n + 1):
        U = gen.random(m)
        E = np.empty(m, dtype=np.int64)
        src = D if driver is not None else X
        for v in g.vertices:
            rows = np.nonzero(V == v)[0]
            if rows.size == 0:
                continue
            outs = g.out_edges(v)
            if euclid:
                P = np.column_stack([sys.prob_batch(e.id, src[rows]) for e in outs])
            else:
                P = np.array([[sys.prob(e.id, src[r]) for e in outs] for r in rows])
            choice = _choose_batch(P, U[rows])
            E[rows] = np.array([index[e.id] for e in outs])[choice]
        newV = V.copy()
        for j, e in enumerate(g.edges):
            rows = np.nonzero(E == j)[0]
            if rows.size == 0:
                continue
            if euclid:
                X[rows] = sys.apply_batch(e.id, X[rows])
                if driver is not None:
                    D[rows] = sys.apply_batch(e.id, D[rows])
            else:
                for r in rows:
                    X[r] = X[r].append(e.id)
                    if driver is not None:
                        D[r] = D[r].append(e.id)
            newV[rows] = e.target
        V = newV
        yield (k, X, E) if driver is None else (k, X, E, D)


def word_frequencies(sys: MarkovSystem, x, depth: int, trajectories: int, seed: int = 0,
                     stream_id: int = 0) -> dict:
    """Empirical law of the first `depth` edges over independent chains from x."""
    words = np.zeros((trajectories, depth), dtype=np.int64)
    for k, _, E in iter_batch(sys, x, trajectories, depth, seed, stream_id):
        if k > 0:
            words[:, k - 1] = E
    ids = sys.graph.edge_ids
    counts: dict = {}
    for d in range(1, depth + 1):
        uniq, cnt = np.unique(words[:, :d], axis=0, return_counts=True)
        for row, c in zip(uniq, cnt):
            counts[tuple(ids[i] for i in row)] = int(c)
    return counts


def paired_distances(sys: MarkovSystem, x, y, n: int, m: int, seed: int = 0, stream_id: int = 0,
                     driven_by: str = "x") -> np.ndarray:
    """d(w_{s_k}..w_{s_1} x, w_{s_k}..w_{s_1} y) for k = 0..n over m coupled path pairs.

    Edges are drawn from the probabilities at the orbit of `driven_by`.
    Returns an (n + 1, m) array.
    """
    a, b = (y, x) if driven_by == "x" else (x, y)
    driver = x if driven_by == "x" else y
    out = np.empty((n + 1, m))
    for k, A, _, D in iter_batch(sys, a, m, n, seed, stream_id, driver=driver):
        if isinstance(sys, EuclideanSystem):
            from .space import distance_batch
            out[k] = distance_batch(sys.metric, A, D)
        else:
            out[k] = [sys.distance(p, q) for p, q in zip(A, D)]
    return out
