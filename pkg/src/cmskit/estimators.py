"""Long-run estimators: ergodic averages, entropy, the empirical invariant measure
and cylinder masses of the generalized Markov measure.

Error bars come from batch means over a single trajectory. The underlying limit
theorems give almost-sure convergence without a rate, so these standard errors
are heuristics, not guarantees.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .rng import Stream
from .simulate import EstimateWithError, cylinder_prob_batch, iter_chain, observable
from .space import SequencePoint
from .system import EuclideanSystem, MarkovSystem

DEFAULT_BATCHES = 30
HEURISTIC = "batch-means standard error (heuristic)"


def batch_means(values: np.ndarray, batches: int = DEFAULT_BATCHES) -> tuple[float, float]:
    """Mean and batch-means standard error; trailing values that do not fill a batch are
    included in the mean but not in the error estimate."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise ValueError("no values")
    mean = float(values.mean())
    b = min(batches, n)
    if b < 2:
        return mean, math.nan
    size = n // b
    bm = values[: size * b].reshape(b, size).mean(axis=1)
    return mean, float(bm.std(ddof=1) / math.sqrt(b))


def _trajectory_values(sys: MarkovSystem, x, n: int, seed: int, stream_id: int,
                       fn: Callable) -> np.ndarray:
    """fn(edge, p_edge, probs, state) at each step k = 0..n-1, state = X_k."""
    out = np.empty(n)
    for k, (v, e, p, probs, xk, _) in enumerate(iter_chain(sys, x, n, Stream(seed, stream_id))):
        out[k] = fn(e, p, probs, xk)
    return out


def _edge_functions(sys: MarkovSystem, f_by_edge) -> dict:
    ids = sys.graph.edge_ids
    if isinstance(f_by_edge, Mapping):
        missing = set(ids) - set(f_by_edge)
        if missing:
            raise KeyError(f"no test function for edges {sorted(missing)}")
        return {e: observable(sys, f_by_edge[e]) for e in ids}
    f = observable(sys, f_by_edge)
    return {e: f for e in ids}


def ergodic_average(sys: MarkovSystem, x, f_by_edge, n: int, seed: int = 0, stream_id: int = 0,
                    batches: int = DEFAULT_BATCHES) -> EstimateWithError:
    """(1/n) sum_{k<n} f_{s_{k+1}}(X_k) along one trajectory from x.

    `f_by_edge` maps edge ids to test functions; a single function (or DSL
    expression) is used for every edge.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    fs = _edge_functions(sys, f_by_edge)
    vals = _trajectory_values(sys, x, n, seed, stream_id, lambda e, p, probs, xk: fs[e](xk))
    mean, se = batch_means(vals, batches)
    return EstimateWithError(mean, se, n, seed, stream_id, HEURISTIC)


def _combine(per_traj: list[np.ndarray], seed: int, stream_id: int, n: int, batches: int) -> EstimateWithError:
    if len(per_traj) == 1:
        mean, se = batch_means(per_traj[0], batches)
        return EstimateWithError(mean, se, n, seed, stream_id, HEURISTIC)
    means = np.array([v.mean() for v in per_traj])
    se = float(means.std(ddof=1) / math.sqrt(len(means)))
    return EstimateWithError(float(means.mean()), se, n * len(means), seed, stream_id,
                             f"mean over {len(means)} trajectories (streams {stream_id}..)")


def _per_stream(sys, x, n, seed, stream_id, trajectories, jobs, fn) -> list[np.ndarray]:
    """One value series per stream id; results are ordered by stream id for any worker count."""
    ids = [stream_id + t for t in range(trajectories)]
    work = lambda sid: _trajectory_values(sys, x, n, seed, sid, fn)
    if jobs <= 1 or trajectories == 1:
        return [work(sid) for sid in ids]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(work, ids))


def estimate_entropy_lyapunov(sys: MarkovSystem, x, n: int, seed: int = 0, trajectories: int = 1,
                              stream_id: int = 0, batches: int = DEFAULT_BATCHES,
                              jobs: int = 1) -> EstimateWithError:
    """-(1/n) log P_x(first n edges), averaged over `trajectories` independent streams.

    The log-probability is accumulated as a sum of step log-probabilities, so the
    product never underflows.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    runs = _per_stream(sys, x, n, seed, stream_id, trajectories, jobs,
                       lambda e, p, probs, xk: -math.log(p))
    return _combine(runs, seed, stream_id, n, batches)


def _state_entropy(probs) -> float:
    return -math.fsum(p * math.log(p) for _, p in probs if p > 0)


def estimate_entropy_integral(sys: MarkovSystem, x, n: int, seed: int = 0, trajectories: int = 1,
                              stream_id: int = 0, batches: int = DEFAULT_BATCHES,
                              jobs: int = 1) -> EstimateWithError:
    """Time average of -sum_e p_e(X_k) log p_e(X_k) along the trajectory."""
    if n < 1:
        raise ValueError("n must be >= 1")
    runs = _per_stream(sys, x, n, seed, stream_id, trajectories, jobs,
                       lambda e, p, probs, xk: _state_entropy(probs))
    return _combine(runs, seed, stream_id, n, batches)


# --- empirical invariant measure ----------------------------------------------------------

@dataclass
class EmpiricalMeasure:
    """Equal-weight point cloud approximating the invariant measure."""

    support: list
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.support) == 0:
            raise ValueError("empty support")

    def __len__(self):
        return len(self.support)

    @property
    def weights(self) -> np.ndarray:
        return np.full(len(self.support), 1.0 / len(self.support))

    def array(self) -> np.ndarray:
        return np.array([tuple(p) for p in self.support], dtype=float)

    def values(self, sys: MarkovSystem, f) -> np.ndarray:
        f = observable(sys, f)
        if isinstance(sys, EuclideanSystem):
            return f.batch(self.array())
        return np.array([f(p) for p in self.support], dtype=float)

    def integrate(self, sys: MarkovSystem, f, batches: int = DEFAULT_BATCHES) -> EstimateWithError:
        mean, se = batch_means(self.values(sys, f), batches)
        return EstimateWithError(mean, se, len(self), self.provenance.get("seed"),
                                 self.provenance.get("stream_id"), HEURISTIC)

    def to_json(self) -> dict:
        enc = [p.to_json() if isinstance(p, SequencePoint) else list(p) for p in self.support]
        return {"provenance": self.provenance, "support": enc}


def empirical_measure(sys: MarkovSystem, x0, n: int, burnin: Optional[int] = None, seed: int = 0,
                      stream_id: int = 0) -> EmpiricalMeasure:
    """States X_burnin, ..., X_{n-1} of one trajectory from x0 (default burnin n/10)."""
    if burnin is None:
        burnin = n // 10
    if not 0 <= burnin < n:
        raise ValueError("need n > burnin >= 0")
    support = [x0] if burnin == 0 else []
    for k, (_, _, _, _, _, y) in enumerate(iter_chain(sys, x0, n - 1, Stream(seed, stream_id)), start=1):
        if k >= burnin:
            support.append(y)
    return EmpiricalMeasure(support, {"start": _enc(x0), "burnin": burnin, "n": n,
                                      "seed": seed, "stream_id": stream_id})


def _enc(x):
    return x.to_json() if isinstance(x, SequencePoint) else list(x)


def _support_input(sys: MarkovSystem, mu: EmpiricalMeasure):
    return mu.array() if isinstance(sys, EuclideanSystem) else mu.support


def markov_measure_cylinder(sys: MarkovSystem, mu: EmpiricalMeasure, word: Sequence[str],
                            _X=None) -> EstimateWithError:
    """M([e_1..e_k]) estimated as the mu-average of P_x(_1[e_1..e_k])."""
    word = tuple(word)
    X = _support_input(sys, mu) if _X is None else _X
    vals = cylinder_prob_batch(sys, X, word)
    m = len(vals)
    se = float(vals.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return EstimateWithError(math.fsum(vals) / m, se, m, mu.provenance.get("seed"),
                             mu.provenance.get("stream_id"), "support average")


@dataclass
class StationarityRow:
    word: tuple
    mass: float
    extended_mass: float
    discrepancy: float


def stationarity_check(sys: MarkovSystem, mu: EmpiricalMeasure, words: Sequence[Sequence[str]]) -> list[StationarityRow]:
    """|sum_{e0 : t(e0) = i(w_1)} M([e0 w]) - M([w])| for each word (M([]) = 1)."""
    g = sys.graph
    X = _support_input(sys, mu)
    rows = []
    for w in words:
        w = tuple(w)
        mass = markov_measure_cylinder(sys, mu, w, X).value
        pre = g.in_edges(g.source(w[0])) if w else g.edges
        ext = math.fsum(markov_measure_cylinder(sys, mu, (e.id,) + w, X).value for e in pre)
        rows.append(StationarityRow(w, mass, ext, abs(ext - mass)))
    return rows


def representative_distance(sys: MarkovSystem, mu: EmpiricalMeasure,
                            batches: int = DEFAULT_BATCHES) -> EstimateWithError:
    """Mean of d(x, x_{vertex(x)}) over the support, with a batch-means error."""
    reps = sys.representatives
    vals = np.array([sys.distance(p, reps[sys.require_vertex(p)]) for p in mu.support], dtype=float)
    mean, se = batch_means(vals, batches)
    return EstimateWithError(mean, se, len(vals), mu.provenance.get("seed"),
                             mu.provenance.get("stream_id"), HEURISTIC)
