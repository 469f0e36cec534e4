"""Likelihood ratios of path laws started at two points of the same vertex set.

For a word s_1..s_n write p_i^x = p_{s_i}(w_{s_{i-1}} o ... o w_{s_1} x). Then
X_n = prod p_i^y / p_i^x is a P_x-martingale, Y_n = sum (p_i^y - p_i^x) / p_i^y is a
P_y-martingale, and log X_n <= Y_n + Z_n with Z_n = delta^-2 sum (p_i^y - p_i^x)^2.
This module computes these along given words, checks the martingale identities
by enumeration, and runs the Monte Carlo diagnostics for the tail and variance
bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InadmissibleWord, MissingModulus, MissingRate, VertexMismatch
from .simulate import DEFAULT_CAP, _check_cap, cylinder_prob, iter_batch
from .space import distance_batch
from .system import EuclideanSystem, MarkovSystem


def _ratio(num: float, den: float) -> float:
    # 0/0 = 0 by convention
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def _same_vertex(sys: MarkovSystem, x, y) -> int:
    vx, vy = sys.require_vertex(x), sys.require_vertex(y)
    if vx != vy:
        raise VertexMismatch(f"x lies in K_{vx} but y lies in K_{vy}")
    return vx


@dataclass
class MartingalePath:
    x: object
    y: object
    word: tuple
    px: np.ndarray
    py: np.ndarray
    X: np.ndarray  # X[k] for k = 0..n, X[0] = 1
    Y: np.ndarray
    Z: np.ndarray

    def log_bound_gap(self) -> np.ndarray:
        """(Y_k + Z_k) - log X_k for k = 1..n; nonnegative up to rounding."""
        with np.errstate(divide="ignore"):
            return self.Y[1:] + self.Z[1:] - np.log(self.X[1:])

    def rows(self):
        for k in range(1, len(self.X)):
            yield [k, self.word[k - 1], self.px[k - 1], self.py[k - 1], self.X[k], self.Y[k], self.Z[k]]


def likelihood_path(sys: MarkovSystem, x, y, word: Sequence[str]) -> MartingalePath:
    """X_k, Y_k, Z_k along `word` (admissible from the common vertex of x and y)."""
    v = _same_vertex(sys, x, y)
    word = tuple(word)
    if word and not sys.graph.is_admissible(word, v):
        raise InadmissibleWord(f"{word!r} is not admissible from vertex {v}")
    n = len(word)
    px, py = np.empty(n), np.empty(n)
    X, Y, Z = np.ones(n + 1), np.zeros(n + 1), np.zeros(n + 1)
    cx = cy = 1.0
    d2 = sys.delta ** -2
    for i, e in enumerate(word):
        a, b = sys.prob(e, x), sys.prob(e, y)
        px[i], py[i] = a, b
        cx *= a
        cy *= b
        X[i + 1] = _ratio(cy, cx)
        Y[i + 1] = Y[i] + _ratio(b - a, b)
        Z[i + 1] = Z[i] + d2 * (b - a) ** 2
        x, y = sys.apply(e, x), sys.apply(e, y)
    return MartingalePath(x, y, word, px, py, X, Y, Z)


# --- exact checks by enumeration ----------------------------------------------------------

def _leaves(sys: MarkovSystem, x, y, n: int):
    """(word, P_x(word), P_y(word), x_n, y_n) for every admissible word of length n."""
    out = []

    def walk(word, a, b, cx, cy, v):
        if len(word) == n:
            out.append((word, cx, cy, a, b))
            return
        for e in sys.out_edges(v):
            walk(word + (e.id,), sys.apply(e.id, a), sys.apply(e.id, b),
                 cx * sys.prob(e.id, a), cy * sys.prob(e.id, b), e.target)

    walk((), x, y, 1.0, 1.0, sys.require_vertex(x))
    return out


@dataclass
class ExactCheck:
    n: int
    max_discrepancy: float
    worst_word: tuple
    cylinders: int
    total_mass: float = math.nan

    def to_dict(self):
        return {"n": self.n, "max_discrepancy": self.max_discrepancy,
                "worst_word": list(self.worst_word), "cylinders": self.cylinders,
                "total_mass": self.total_mass}


def martingale_check_exact(sys: MarkovSystem, x, y, n: int, cap: int = DEFAULT_CAP) -> ExactCheck:
    """max over cylinders C of depth m <= n of |E_{P_x}[X_n 1_C] - P_y(C)|.

    P_y(C) is recomputed independently with cylinder_prob for each prefix.
    """
    _same_vertex(sys, x, y)
    if n < 0:
        raise ValueError("n must be >= 0")
    _check_cap(sys, x, n, cap, cumulative=False)
    leaves = _leaves(sys, x, y, n)
    sums: dict[tuple, list] = {}
    for word, cx, cy, _, _ in leaves:
        term = cx * _ratio(cy, cx)
        for m in range(n + 1):
            sums.setdefault(word[:m], []).append(term)
    worst, worst_w = 0.0, ()
    for prefix, terms in sums.items():
        diff = abs(math.fsum(terms) - cylinder_prob(sys, y, prefix))
        if diff > worst:
            worst, worst_w = diff, prefix
    return ExactCheck(n, worst, worst_w, len(sums), math.fsum(sums[()]))


def y_martingale_check_exact(sys: MarkovSystem, x, y, n: int, cap: int = DEFAULT_CAP) -> ExactCheck:
    """max over depth-n cylinders of |E_{P_y}[(Y_{n+1} - Y_n) 1_cyl]|."""
    _same_vertex(sys, x, y)
    if n < 0:
        raise ValueError("n must be >= 0")
    _check_cap(sys, x, n + 1, cap, cumulative=False)
    worst, worst_w = 0.0, ()
    leaves = _leaves(sys, x, y, n)
    g = sys.graph
    for word, _, cy, a, b in leaves:
        v = g.target(word[-1]) if word else sys.require_vertex(x)
        terms = []
        for e in sys.out_edges(v):
            pa, pb = sys.prob(e.id, a), sys.prob(e.id, b)
            terms.append(cy * pb * _ratio(pb - pa, pb))
        diff = abs(math.fsum(terms))
        if diff > worst:
            worst, worst_w = diff, word
    return ExactCheck(n, worst, worst_w, len(leaves))


# --- Monte Carlo under P_y ------------------------------------------------------------------

@dataclass
class CoupledRun:
    """Paths drawn under P_y with both orbits moved by the same edges."""

    px: np.ndarray  # (n, m) probability of the taken edge at the x-orbit
    py: np.ndarray
    dist: np.ndarray  # (n + 1, m) distance between the orbits
    seed: int
    stream_id: int


def coupled_run(sys: MarkovSystem, x, y, n: int, m: int, seed: int = 0, stream_id: int = 0) -> CoupledRun:
    _same_vertex(sys, x, y)
    g = sys.graph
    euclid = isinstance(sys, EuclideanSystem)
    px, py = np.empty((n, m)), np.empty((n, m))
    dist = np.empty((n + 1, m))
    prev = None
    for k, A, E, D in iter_batch(sys, x, m, n, seed, stream_id, driver=y):
        if euclid:
            dist[k] = distance_batch(sys.metric, A, D)
        else:
            dist[k] = [sys.distance(a, d) for a, d in zip(A, D)]
        if k > 0:
            Ap, Dp = prev
            for j, e in enumerate(g.edges):
                rows = np.nonzero(E == j)[0]
                if rows.size == 0:
                    continue
                if euclid:
                    px[k - 1, rows] = sys.prob_batch(e.id, Ap[rows])
                    py[k - 1, rows] = sys.prob_batch(e.id, Dp[rows])
                else:
                    px[k - 1, rows] = [sys.prob(e.id, Ap[r]) for r in rows]
                    py[k - 1, rows] = [sys.prob(e.id, Dp[r]) for r in rows]
        prev = (A.copy(), D.copy()) if euclid else (list(A), list(D))
    return CoupledRun(px, py, dist, seed, stream_id)


def _require_rate(sys: MarkovSystem) -> float:
    if sys.rate is None:
        raise MissingRate(f"{sys.name} declares no contraction rate")
    return sys.rate


@dataclass
class VarianceReport:
    n: int
    estimate: float
    std_error: float
    bound: float
    holds: bool
    budget: int
    seed: int

    def to_dict(self):
        return vars(self).copy()


def variance_bound_check(sys: MarkovSystem, x, y, n: int, mc_budget: int = 100_000, seed: int = 0,
                         envelope: Optional[Callable[[float], float]] = None) -> VarianceReport:
    """E_{P_y}[Y_n^2] by Monte Carlo against
    delta^-2 (sum_{i<=n} a^{i/2} + sum_{i<=n} phi(a^{i/2} d(x, y))^2)."""
    a = _require_rate(sys)
    phi = envelope or sys.envelope
    if phi is None:
        raise MissingModulus(f"{sys.name} has no modulus envelope; pass one explicitly")
    d0 = sys.distance(x, y)
    bound = sys.delta ** -2 * (math.fsum(a ** (i / 2) for i in range(1, n + 1))
                               + math.fsum(phi(a ** (i / 2) * d0) ** 2 for i in range(1, n + 1)))
    run = coupled_run(sys, x, y, n, mc_budget, seed)
    with np.errstate(divide="ignore", invalid="ignore"):
        inc = np.where(run.py == 0, 0.0, (run.py - run.px) / run.py)
    Y2 = inc.sum(axis=0) ** 2
    est = float(Y2.mean())
    se = float(Y2.std(ddof=1) / math.sqrt(mc_budget)) if mc_budget > 1 else 0.0
    return VarianceReport(n, est, se, bound, est <= bound + 3 * se, mc_budget, seed)


@dataclass
class TailRow:
    i: int
    frequency: float
    bound: float
    std_error: float
    flagged: bool


@dataclass
class TailReport:
    rows: list
    budget: int
    seed: int
    d0: float

    @property
    def violations(self) -> int:
        return sum(r.flagged for r in self.rows)

    def to_dict(self):
        return {"budget": self.budget, "seed": self.seed, "d0": self.d0,
                "violations": self.violations, "rows": [vars(r) for r in self.rows]}


def tail_bound_check(sys: MarkovSystem, x, y, i_max: int, mc_budget: int = 100_000,
                     seed: int = 0) -> TailReport:
    """Frequency of {d(orbit of y, orbit of x) at step i > a^{i/2} d(x, y)} under P_y, i = 1..i_max.

    A row is flagged when the frequency exceeds a^{i/2} by more than three
    binomial standard errors, computed at the bound.
    """
    a = _require_rate(sys)
    run = coupled_run(sys, x, y, i_max, mc_budget, seed)
    d0 = float(run.dist[0, 0]) if mc_budget else sys.distance(x, y)
    rows = []
    for i in range(1, i_max + 1):
        b = a ** (i / 2)
        freq = float(np.mean(run.dist[i] > b * d0))
        se = math.sqrt(b * (1 - b) / mc_budget)
        rows.append(TailRow(i, freq, b, se, freq > b + 3 * se))
    return TailReport(rows, mc_budget, seed, d0)


@dataclass
class UITable:
    thresholds: list
    sup_tail: list  # sup_{n<=N} P_y(log X_n > K) per K
    N: int
    budget: int
    seed: int

    @property
    def nonincreasing(self) -> bool:
        return all(b <= a for a, b in zip(self.sup_tail, self.sup_tail[1:]))

    def to_dict(self):
        return vars(self).copy() | {"nonincreasing": self.nonincreasing}


def ui_table(sys: MarkovSystem, x, y, N: int, thresholds: Sequence[float] = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0),
             mc_budget: int = 10_000, seed: int = 0) -> UITable:
    """K -> sup_{n<=N} P_y(log X_n > K), estimated from coupled paths under P_y."""
    run = coupled_run(sys, x, y, N, mc_budget, seed)
    with np.errstate(divide="ignore"):
        logX = np.cumsum(np.log(run.py) - np.log(run.px), axis=0)
    Ks = sorted(float(k) for k in thresholds)
    sup = [float((logX > K).mean(axis=1).max()) if N else 0.0 for K in Ks]
    return UITable(Ks, sup, N, mc_budget, seed)
