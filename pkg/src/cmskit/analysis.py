"""Numerical checks of contraction on average and of continuity moduli."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParams, MissingRate, SamplerExhausted
from .rng import generator
from .space import SequencePoint, distance_batch
from .system import EuclideanSystem, MarkovSystem, SequenceSystem

NEAR_SCALES = (1e-3, 1e-2, 1e-1)


# --- contraction rate -----------------------------------------------------------

@dataclass
class RateReport:
    max_ratio: float
    argmax: tuple
    per_vertex: dict
    per_stratum: dict
    pairs: int
    declared_rate: Optional[float]
    exceeding: int
    box: Optional[float] = None

    def to_dict(self):
        def enc(p):
            return p.to_json() if isinstance(p, SequencePoint) else [float(c) for c in p]
        return {
            "max_ratio": self.max_ratio, "argmax": [enc(p) for p in self.argmax],
            "per_vertex": {str(k): v for k, v in self.per_vertex.items()},
            "per_stratum": self.per_stratum, "pairs": self.pairs,
            "declared_rate": self.declared_rate, "pairs_exceeding_rate": self.exceeding,
            "sampling_box_radius": self.box,
        }


def contraction_ratios(sys: EuclideanSystem, vertex: int, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """sum_e p_e(x) d(w_e x, w_e y) / d(x, y) row-wise, for x, y in K_vertex, x != y."""
    num = np.zeros(len(X))
    for e in sys.out_edges(vertex):
        num += sys.prob_batch(e.id, X) * distance_batch(sys.metric, sys.apply_batch(e.id, X),
                                                        sys.apply_batch(e.id, Y))
    return num / distance_batch(sys.metric, X, Y)


def _deterministic_pairs(sys: EuclideanSystem, vertex: int):
    """Representative-, origin- and axis-anchored pairs with axis-aligned offsets."""
    d, R = sys.dim, sys.box
    anchors = [np.asarray(sys.representatives[vertex], float), np.zeros(d)]
    rep = anchors[0]
    for j in range(d):
        for t in np.linspace(-R, R, 81):
            a = rep.copy()
            a[j] = t
            anchors.append(a)
    A = np.array(anchors)
    A = A[sys.contains_batch(vertex, A)]
    offsets = []
    for j in range(d):
        for h in (1e-3, 1e-2, 1e-1, 1.0):
            for s in (1.0, -1.0):
                o = np.zeros(d)
                o[j] = s * h
                offsets.append(o)
    for h in (1e-3, 1e-1, 1.0):
        offsets.append(np.full(d, h))
        offsets.append(np.full(d, -h))
    O = np.array(offsets)
    X = np.repeat(A, len(O), axis=0)
    Y = X + np.tile(O, (len(A), 1))
    return X, Y


def _random_pairs(sys: EuclideanSystem, vertex: int, count: int, gen: np.random.Generator):
    """Four strata of equal size: uniform, near (random direction), axis-aligned, representative-centred."""
    d, R = sys.dim, sys.box
    diam = 2 * R * (d if sys.metric.value == "l1" else 1)
    q = max(1, count // 4)
    out = {}
    X = gen.uniform(-R, R, (q, d))
    out["uniform"] = (X, gen.uniform(-R, R, (q, d)))
    X = gen.uniform(-R, R, (q, d))
    dirs = gen.normal(size=(q, d))
    dirs /= distance_batch(sys.metric, dirs, np.zeros_like(dirs))[:, None]
    scale = np.asarray(NEAR_SCALES)[gen.integers(len(NEAR_SCALES), size=q)] * diam
    out["near"] = (X, X + dirs * scale[:, None] * gen.uniform(0.1, 1.0, q)[:, None])
    X = gen.uniform(-R, R, (q, d))
    axis = gen.integers(d, size=q)
    h = np.exp(gen.uniform(math.log(1e-4), math.log(R), q)) * gen.choice([-1.0, 1.0], q)
    Y = X.copy()
    Y[np.arange(q), axis] += h
    out["axis"] = (X, Y)
    rep = np.asarray(sys.representatives[vertex], float)
    Y = rep + gen.normal(size=(q, d)) * np.exp(gen.uniform(math.log(1e-3), math.log(R), q))[:, None]
    Xr = np.repeat(rep[None, :], q, axis=0)
    half = q // 2
    out["representative"] = (np.vstack([Xr[:half], Y[half:]]), np.vstack([Y[:half], Xr[half:]]))
    return out


def estimate_contraction_rate(sys: MarkovSystem, pair_budget: int = 100_000, seed: int = 0,
                              chunk: int = 200_000) -> RateReport:
    """Largest sampled value of sum_e p_e(x) d(w_e x, w_e y) / d(x, y) over same-vertex pairs."""
    if pair_budget < 1:
        raise ValueError("pair_budget must be >= 1")
    if isinstance(sys, SequenceSystem):
        return _sequence_rate(sys, pair_budget, seed)
    gen = generator(seed, 0xA11)
    best, arg = -math.inf, None
    per_vertex: dict = {}
    per_stratum: dict = {}
    total = exceed = 0
    limit = None if sys.rate is None else sys.rate + 1e-9
    nv = sys.graph.vertex_count

    def consume(stratum, v, X, Y):
        nonlocal best, arg, total, exceed
        keep = sys.contains_batch(v, X) & sys.contains_batch(v, Y)
        keep &= distance_batch(sys.metric, X, Y) > 0
        X, Y = X[keep], Y[keep]
        if len(X) == 0:
            return
        r = contraction_ratios(sys, v, X, Y)
        total += len(r)
        k = int(np.argmax(r))
        if limit is not None:
            exceed += int(np.count_nonzero(r > limit))
        per_vertex[v] = max(per_vertex.get(v, -math.inf), float(r[k]))
        per_stratum[stratum] = max(per_stratum.get(stratum, -math.inf), float(r[k]))
        if r[k] > best:
            best, arg = float(r[k]), (tuple(X[k]), tuple(Y[k]))

    for v in sys.graph.vertices:
        X, Y = _deterministic_pairs(sys, v)
        consume("deterministic", v, X, Y)
        consume("deterministic", v, Y, X)
        remaining = max(0, pair_budget // nv)
        while remaining > 0:
            size = min(chunk, remaining)
            for stratum, (X, Y) in _random_pairs(sys, v, size, gen).items():
                consume(stratum, v, X, Y)
            remaining -= size
    if arg is None:
        raise SamplerExhausted("no admissible pair found")
    return RateReport(best, arg, per_vertex, per_stratum, total, sys.rate, exceed, sys.box)


def _sequence_rate(sys: SequenceSystem, pair_budget: int, seed: int) -> RateReport:
    gen = generator(seed, 0xA11)
    best, arg, exceed = -math.inf, None, 0
    per_vertex: dict = {}
    limit = None if sys.rate is None else sys.rate + 1e-9
    total = 0
    for _ in range(pair_budget):
        x = sys.random_point(gen)
        v = sys.vertex_of(x)
        y = sys.random_point(gen, vertex=v)
        if sys.vertex_of(y) != v:
            continue
        d = sys.distance(x, y)
        if d == 0:
            continue
        num = sum(sys.prob(e.id, x) * sys.distance(sys.apply(e.id, x), sys.apply(e.id, y))
                  for e in sys.out_edges(v))
        r = num / d
        total += 1
        if limit is not None and r > limit:
            exceed += 1
        per_vertex[v] = max(per_vertex.get(v, -math.inf), r)
        if r > best:
            best, arg = r, (x, y)
    if arg is None:
        raise SamplerExhausted("no admissible pair found")
    return RateReport(best, arg, per_vertex, {"uniform": best}, total, sys.rate, exceed, None)


# --- moduli of continuity ---------------------------------------------------------

@dataclass
class ModulusProfile:
    t_grid: np.ndarray
    phi: np.ndarray
    mode: str  # "sampled-lower-bound" | "exact-closed-form"
    b: float = 1.0
    c: float = 0.5
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, len(self.phi) + 1)

    def rows(self, N: Optional[int] = None):
        """CSV rows (n, t, phi, S1, S2)."""
        N = len(self.phi) if N is None else N
        s1 = np.cumsum(self.phi[:N])
        s2 = np.cumsum(self.phi[:N] ** 2)
        for k in range(N):
            yield [k + 1, self.t_grid[k], self.phi[k], s1[k], s2[k]]


def modulus_profile(fn: Callable, vertex: int, sys: MarkovSystem, b: float = 1.0, c: float = 0.5,
                    N: int = 20, pair_budget: int = 100_000, seed: int = 0) -> ModulusProfile:
    """Sampled lower bounds on phi(b c^n), n = 1..N, for fn restricted to K_vertex.

    Every pair consumes a fixed block of uniforms, so a smaller budget sees a
    prefix of the pairs of a larger one.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < c < 1 or b <= 0:
        raise InvalidParams("need b > 0 and 0 < c < 1")
    t = b * c ** np.arange(1, N + 1, dtype=float)
    gen = generator(seed, 0xB0D)
    if isinstance(sys, SequenceSystem):
        dists, diffs = _sequence_pairs(fn, vertex, sys, N, pair_budget, gen)
    else:
        d, R = sys.dim, sys.box
        Ublock = gen.random((pair_budget, 2 * d + 1))
        X = -R + 2 * R * Ublock[:, :d]
        dirs = 2 * Ublock[:, d:2 * d] - 1
        norms = distance_batch(sys.metric, dirs, np.zeros_like(dirs))
        ok = norms > 1e-12
        lo, hi = math.log(t[-1]) - 1.0, math.log(t[0])
        radius = np.exp(lo + (hi - lo) * Ublock[:, -1])
        Y = X + dirs / np.where(ok, norms, 1.0)[:, None] * radius[:, None]
        keep = ok & sys.contains_batch(vertex, X) & sys.contains_batch(vertex, Y)
        X, Y = X[keep], Y[keep]
        if len(X) == 0:
            raise SamplerExhausted(f"no pair of K_{vertex} points found within budget")
        fb = getattr(fn, "batch", None)
        if fb is not None:
            fx, fy = fb(X), fb(Y)
        else:
            fx = np.array([fn(tuple(r)) for r in X])
            fy = np.array([fn(tuple(r)) for r in Y])
        diffs = np.abs(fx - fy)
        dists = distance_batch(sys.metric, X, Y)
    order = np.argsort(dists)
    running = np.maximum.accumulate(diffs[order])
    idx = np.searchsorted(dists[order], t, side="right") - 1
    phi = np.where(idx >= 0, running[np.maximum(idx, 0)], 0.0)
    meta = {"pairs": int(len(dists)), "budget": pair_budget, "seed": seed,
            "box_radius": getattr(sys, "box", None), "vertex": vertex}
    return ModulusProfile(t, phi, "sampled-lower-bound", b, c, meta)


def _sequence_pairs(fn, vertex, sys: SequenceSystem, N, budget, gen):
    dists, diffs = [], []
    for _ in range(budget):
        x = sys.random_point(gen, vertex=vertex)
        k = int(gen.integers(0, N + 2))
        suffix = x.word[len(x.word) - k:] if k else ()
        start = sys.graph.source(suffix[0]) if suffix else vertex
        y = sys.random_point(gen, vertex=start)
        for s in suffix:
            y = y.append(s)
        if sys.vertex_of(y) != vertex:
            continue
        dists.append(sys.distance(x, y))
        diffs.append(abs(fn(x) - fn(y)))
    return np.array(dists), np.array(diffs)


def jo_modulus(alpha: float, delta: float, n: int) -> float:
    """phi(c^n) = alpha / (n log(1/c)) with c = 1/e, for p(x) = alpha/log(1/x) + delta on [0, 1/e]."""
    if not (alpha > 0 and delta > 0 and alpha + delta < 1):
        raise InvalidParams("need alpha, delta > 0 and alpha + delta < 1")
    if n < 1:
        raise InvalidParams("n must be >= 1")
    return alpha / n  # log(1/c) = 1 for c = 1/e


def jo_function(alpha: float, delta: float) -> Callable[[float], float]:
    """The probability function p itself (square summable variation, not Dini)."""
    def p(x: float) -> float:
        if x == 0:
            return delta
        return alpha / math.log(1 / x) + delta
    return p


def jo_profile(alpha: float, delta: float, N: int) -> ModulusProfile:
    n = np.arange(1, N + 1, dtype=float)
    jo_modulus(alpha, delta, 1)  # parameter check
    return ModulusProfile(np.exp(-n), alpha / n, "exact-closed-form", 1.0, math.exp(-1),
                          {"alpha": alpha, "delta": delta})


@dataclass
class VariationReport:
    classification: str
    S1: float
    S2: float
    S1_growing: bool
    S2_growing: bool
    N: int
    blocks: dict

    def to_dict(self):
        return {"classification": self.classification, "S1": self.S1, "S2": self.S2,
                "S1_growing": self.S1_growing, "S2_growing": self.S2_growing,
                "N": self.N, "decade_blocks": self.blocks}


def _decade_blocks(terms: np.ndarray) -> tuple[float, float]:
    """Sums of terms over n in (N/100, N/10] and (N/10, N]."""
    N = len(terms)
    a, b = N // 100, N // 10
    return math.fsum(terms[a:b]), math.fsum(terms[b:])


def _converges(terms, tail_threshold) -> tuple[bool, float, float]:
    prev, last = _decade_blocks(terms)
    if last <= tail_threshold and prev <= tail_threshold:
        return True, prev, last
    return last <= prev / 2, prev, last


def variation_class(profile: ModulusProfile, N_partial: Optional[int] = None,
                    tail_threshold: float = 1e-12) -> VariationReport:
    """Partial sums of phi and phi^2 and a Dini / square-summable verdict.

    A series counts as convergent when its last decade block is at most half the
    previous one. Divergence is only declared for exact profiles; sampled values
    are lower bounds and cannot prove it.
    """
    N = len(profile.phi) if N_partial is None else N_partial
    if N > len(profile.phi):
        raise ValueError(f"profile has {len(profile.phi)} entries, need {N}")
    phi = profile.phi[:N]
    S1, S2 = math.fsum(phi), math.fsum(phi * phi)
    if N < 10:
        return VariationReport("inconclusive", S1, S2, True, True, N, {})
    c1, p1, l1 = _converges(phi, tail_threshold)
    c2, p2, l2 = _converges(phi * phi, tail_threshold)
    exact = profile.mode == "exact-closed-form"
    if c1:
        label = "dini"
    elif c2:
        label = "square_summable_not_dini" if exact else "inconclusive"
    else:
        label = "neither_detected" if exact else "inconclusive"
    blocks = {"S1": [p1, l1], "S2": [p2, l2]}
    return VariationReport(label, S1, S2, l1 > tail_threshold, l2 > tail_threshold, N, blocks)


# --- moment bound -------------------------------------------------------------------

def moment_bound(sys: MarkovSystem, representatives: Optional[dict] = None) -> float:
    """C/(1-a) with C = max_e d(w_e x_{i(e)}, x_{t(e)})."""
    if sys.rate is None:
        raise MissingRate("moment_bound needs a declared rate a")
    reps = representatives or sys.representatives
    C = max(sys.distance(sys.apply(e.id, reps[e.source]), reps[e.target]) for e in sys.graph.edges)
    return C / (1 - sys.rate)
