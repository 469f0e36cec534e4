"""Backward iteration of edge words: approximations of the coding map, their
convergence and start independence, the energy function and the drift diagnostic.

A backward word is stored oldest edge first, (e_m, ..., e_0); coding it means
applying w_{e_m} first and w_{e_0} last to the representative of i(e_m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InadmissibleWord, WrongAlphabet
from .estimators import empirical_measure
from .rng import generator
from .simulate import iter_batch
from .space import SequencePoint, distance_batch
from .system import EuclideanSystem, MarkovSystem, SequenceSystem

DEFAULT_DEPTHS = (10, 100, 1000, 5000)


@dataclass(frozen=True)
class BackwardWord:
    edges: tuple  # oldest first

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        if not self.edges:
            raise InadmissibleWord("a backward word needs at least one edge")

    def check(self, sys: MarkovSystem) -> "BackwardWord":
        if not sys.graph.is_admissible(self.edges):
            raise InadmissibleWord(f"{self.edges!r} is not a path in the graph")
        return self

    def source_vertex(self, sys: MarkovSystem) -> int:
        return sys.graph.source(self.edges[0])

    def __len__(self):
        return len(self.edges)


def _as_word(w) -> BackwardWord:
    return w if isinstance(w, BackwardWord) else BackwardWord(tuple(w))


def code_word(sys: MarkovSystem, w, start_choice: Optional[dict] = None):
    """w_{e_0} o ... o w_{e_m}(x_{i(e_m)}) with representatives or start_choice overrides."""
    w = _as_word(w).check(sys)
    starts = start_choice or sys.representatives
    x = starts[w.source_vertex(sys)]
    for e in w.edges:
        x = sys.apply(e, x)
    return x


def code_batch(sys: MarkovSystem, words: np.ndarray, starts) -> list | np.ndarray:
    """Code every row of an (m, L) array of edge indices (oldest first).

    `starts` is a per-vertex dict of start points or a per-row sequence of them.
    Euclidean systems are coded in vectorized form.
    """
    g = sys.graph
    edges = g.edges
    m, L = words.shape
    src = np.array([e.source for e in edges])[words[:, 0]]
    if isinstance(starts, dict):
        rows = [starts[int(v)] for v in src]
    else:
        rows = list(starts)
    if isinstance(sys, EuclideanSystem):
        X = np.array([tuple(r) for r in rows], dtype=float)
        for j in range(L):
            col = words[:, j]
            for k, e in enumerate(edges):
                sel = np.nonzero(col == k)[0]
                if sel.size:
                    X[sel] = sys.apply_batch(e.id, X[sel])
        return X
    out = []
    ids = g.edge_ids
    for r, row in zip(rows, words):
        p = r
        for k in row:
            p = sys.apply(ids[k], p)
        out.append(p)
    return out


def _distances(sys: MarkovSystem, A, B) -> np.ndarray:
    if isinstance(sys, EuclideanSystem):
        return distance_batch(sys.metric, A, B)
    return np.array([sys.distance(p, q) for p, q in zip(A, B)])


# --- sampling backward words --------------------------------------------------------

def sample_words(sys: MarkovSystem, length: int, count: int, seed: int = 0, burnin: int = 1000,
                 spacing: int = 10) -> np.ndarray:
    """(count, length) edge-index words: forward runs from states of an empirical measure.

    The empirical measure is one trajectory from the vertex-1 representative;
    starts are taken every `spacing` states after `burnin`. Column 0 is the
    oldest edge of the resulting backward word.
    """
    mu = empirical_measure(sys, sys.representative(1), burnin + count * spacing + 1, burnin,
                           seed=seed, stream_id=1)
    starts = mu.support[::spacing][:count]
    if isinstance(sys, EuclideanSystem):
        starts = np.array([tuple(p) for p in starts], dtype=float)
    words = np.empty((count, length), dtype=np.int64)
    for k, _, E in iter_batch(sys, starts, count, length, seed, stream_id=2):
        if k > 0:
            words[:, k - 1] = E
    return words


def perturbed_starts(sys: MarkovSystem, seed: int = 0) -> dict:
    """One point per vertex set, different from the representative where possible."""
    gen = generator(seed, 3)
    out = {}
    for v in sys.graph.vertices:
        rep = sys.representative(v)
        if isinstance(sys, SequenceSystem):
            p = sys.random_point(gen, depth=32, vertex=v)
            out[v] = p if sys.vertex_of(p) == v else rep
            continue
        pts = sys.sample_vertex_points(v, 2000, gen)
        pts = [tuple(p) for p in pts if sys.distance(tuple(p), rep) > 0]
        out[v] = pts[0] if pts else rep
    return out


# --- convergence -----------------------------------------------------------------------

@dataclass
class DepthStats:
    depth: int
    successive_median: float
    successive_p90: float
    successive_max: float
    successive_frac_small: float
    start_median: float
    start_p90: float
    start_max: float
    start_frac_small: float

    def row(self):
        return [self.depth, self.successive_median, self.successive_p90, self.start_median]


@dataclass
class CodingReport:
    depths: list
    stats: list
    words: int
    seed: int
    threshold: float
    starts: dict
    successive: dict = field(default_factory=dict, repr=False)
    start_independence: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {"seed": self.seed, "words": self.words, "threshold": self.threshold,
                "depths": [vars(s) for s in self.stats]}


def coding_convergence(sys: MarkovSystem, seed: int = 0, depth_grid: Sequence[int] = DEFAULT_DEPTHS,
                       words: int = 1000, starts: Optional[dict] = None, threshold: float = 1e-6,
                       burnin: int = 1000) -> CodingReport:
    """Successive and start-independence distances of backward codes by depth.

    At depth m the code uses the last m edges of each sampled word; the
    successive distance compares depths m and m + 1, and the start-independence
    distance compares depth-m codes from the representatives and from `starts`.
    """
    depths = [int(m) for m in depth_grid]
    if not depths or depths[0] < 1 or any(b <= a for a, b in zip(depths, depths[1:])):
        raise ValueError("depth grid must be positive and strictly increasing")
    L = depths[-1] + 1
    W = sample_words(sys, L, words, seed, burnin)
    alt = starts or perturbed_starts(sys, seed)
    reps = sys.representatives
    report = CodingReport(depths, [], words, seed, threshold, alt)
    for m in depths:
        cm = code_batch(sys, W[:, L - m:], reps)
        cm1 = code_batch(sys, W[:, L - m - 1:], reps)
        cy = code_batch(sys, W[:, L - m:], alt)
        s = _distances(sys, cm, cm1)
        t = _distances(sys, cm, cy)
        report.successive[m] = s
        report.start_independence[m] = t
        report.stats.append(DepthStats(
            m, float(np.median(s)), float(np.quantile(s, 0.9)), float(s.max()),
            float(np.mean(s < threshold)), float(np.median(t)), float(np.quantile(t, 0.9)),
            float(t.max()), float(np.mean(t < threshold))))
    return report


# --- Holder diagnostic ---------------------------------------------------------------

@dataclass
class HolderFit:
    alpha: float
    log_C: float
    fraction_within: float
    pairs_used: int
    pairs_discarded: int
    depth: int

    def to_dict(self):
        return vars(self).copy()


def holder_fit(sys: MarkovSystem, seed: int = 0, depth: int = 2000, pairs: int = 500,
               max_shared: int = 60, quantile: float = 0.95) -> HolderFit:
    """Fit log d(F(w), F(w')) <= alpha log d'(w, w') + log C over sampled word pairs.

    Each pair shares its last k edges (k uniform in 1..max_shared); the older
    parts of w' are grown backwards by a uniform reverse walk. d' is the
    two-sided sequence distance 2^-k. alpha is the least-squares slope and log C
    the `quantile` of the residuals; pairs with coinciding codes are discarded.
    """
    g = sys.graph
    gen = generator(seed, 4)
    W = sample_words(sys, depth, pairs, seed)
    W2 = W.copy()
    shared = gen.integers(1, max_shared + 1, size=pairs)
    index = g.edge_index
    for r in range(pairs):
        k = int(shared[r])
        v = g.source(g.edges[W[r, depth - k]].id)
        for j in range(depth - k - 1, -1, -1):
            ins = g.in_edges(v)
            e = ins[int(gen.integers(len(ins)))]
            W2[r, j] = index[e.id]
            v = e.source
    # actual agreement length counted from the newest edge
    agree = np.array([np.argmax(np.append(W[r, ::-1] != W2[r, ::-1], True)) for r in range(pairs)])
    dF = _distances(sys, code_batch(sys, W, sys.representatives), code_batch(sys, W2, sys.representatives))
    keep = (dF > 0) & (agree < depth)
    x = -agree[keep] * math.log(2.0)
    y = np.log(dF[keep])
    if keep.sum() < 3:
        return HolderFit(math.nan, math.nan, math.nan, int(keep.sum()), int((~keep).sum()), depth)
    alpha = float(np.polyfit(x, y, 1)[0])
    resid = y - alpha * x
    log_C = float(np.quantile(resid, quantile))
    within = float(np.mean(resid <= log_C + 1e-12))
    return HolderFit(alpha, log_C, within, int(keep.sum()), int((~keep).sum()), depth)


# --- energy and drift -------------------------------------------------------------------

def energy_u(sys: MarkovSystem, w, next_edge: str, start_choice: Optional[dict] = None) -> float:
    """log p_{next_edge}(code of w): the depth-m approximation of the energy function."""
    w = _as_word(w).check(sys)
    g = sys.graph
    if g.source(next_edge) != g.target(w.edges[-1]):
        raise InadmissibleWord(f"{next_edge!r} cannot follow {w.edges[-1]!r}")
    p = sys.prob(next_edge, code_word(sys, w, start_choice))
    return math.log(p) if p > 0 else -math.inf


def y_drift(word: Sequence) -> list[int]:
    """Running difference (#ones - #zeros) over the last n symbols, n = 1..len.

    `word` is oldest first, so the count starts at the newest symbol.
    """
    out, acc = [], 0
    for s in reversed(list(word)):
        s = str(s)
        if s not in ("0", "1"):
            raise WrongAlphabet(f"symbol {s!r} is not in {{0, 1}}")
        acc += 1 if s == "1" else -1
        out.append(acc)
    return out
