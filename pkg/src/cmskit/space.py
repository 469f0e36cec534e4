"""State spaces: real vectors under L1/L2/Linf, and one-sided symbol sequences.

Euclidean points are plain tuples of floats. Sequence points store the most
recent symbols (..., s_{-1}, s_0) in a shared linked chain, so appending is O(1)
and trajectories share structure. Everything older than the stored depth is
read from a periodic anchor cycle.
"""

from __future__ import annotations

import enum
import math
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .errors import KindMismatch

DEFAULT_MAX_DEPTH = 4096


class Metric(enum.Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"
    SEQ2K = "seq2k"

    @classmethod
    def parse(cls, tag) -> "Metric":
        if isinstance(tag, Metric):
            return tag
        try:
            return cls(str(tag).lower())
        except ValueError:
            raise ValueError(f"unknown metric {tag!r}") from None

    @property
    def is_sequence(self) -> bool:
        return self is Metric.SEQ2K


class SequencePoint:
    """A one-sided sequence ...anchor anchor anchor word, newest symbol last.

    `anchor` is an admissible cycle (tuple of edge ids) repeated to the left.
    """

    __slots__ = ("_cell", "_length", "anchor", "max_depth")

    def __init__(self, word: Sequence[str] = (), anchor: Sequence[str] = (), max_depth: int = DEFAULT_MAX_DEPTH):
        anchor = tuple(anchor)
        if not anchor:
            raise ValueError("a sequence point needs a non-empty anchor cycle")
        self.anchor = anchor
        self.max_depth = max_depth
        cell = None
        for s in word:
            cell = (s, cell)
        self._cell = cell
        self._length = len(word)

    @classmethod
    def _from_cell(cls, cell, length, anchor, max_depth) -> "SequencePoint":
        p = cls.__new__(cls)
        p._cell = cell
        p._length = length
        p.anchor = anchor
        p.max_depth = max_depth
        return p

    @property
    def depth(self) -> int:
        """Stored depth L: number of symbols known beyond the anchor."""
        return min(self._length, self.max_depth)

    def append(self, symbol: str) -> "SequencePoint":
        return SequencePoint._from_cell((symbol, self._cell), self._length + 1, self.anchor, self.max_depth)

    def iter_symbols(self) -> Iterator[str]:
        """Symbols s_0, s_{-1}, s_{-2}, ... (infinite; anchor repeats after the stored depth)."""
        cell = self._cell
        for _ in range(self.depth):
            yield cell[0]
            cell = cell[1]
        k = len(self.anchor)
        j = 0
        while True:
            yield self.anchor[k - 1 - (j % k)]
            j += 1

    def symbol_at(self, j: int) -> str:
        """Symbol at position -j (j = 0 is the most recent)."""
        for k, s in enumerate(self.iter_symbols()):
            if k == j:
                return s
        raise AssertionError  # pragma: no cover

    @property
    def last(self) -> str:
        return self._cell[0] if self.depth > 0 else self.anchor[-1]

    @property
    def word(self) -> tuple[str, ...]:
        """Stored symbols, oldest first."""
        out = []
        cell = self._cell
        for _ in range(self.depth):
            out.append(cell[0])
            cell = cell[1]
        return tuple(reversed(out))

    def __eq__(self, other):
        if not isinstance(other, SequencePoint):
            return NotImplemented
        return seq_agreement(self, other) is None

    def __hash__(self):
        return hash((self.word[-16:], self.anchor))

    def __repr__(self):
        w = self.word
        shown = "".join(f"{s}," for s in w[-8:])
        more = "..." if len(w) > 8 else ""
        return f"SequencePoint(({''.join(self.anchor)})^inf {more}{shown.rstrip(',')}; depth={self.depth})"

    def to_json(self):
        return {"anchor": list(self.anchor), "word": list(self.word)}


Point = Union[tuple, SequencePoint]


def seq_agreement(p: SequencePoint, q: SequencePoint) -> Optional[int]:
    """Number of leading positions 0, -1, ... on which p and q agree; None if identical."""
    # Once both stored words are exhausted, both sides are periodic; agreement over
    # one common period beyond that point means they agree forever.
    horizon = max(p.depth, q.depth) + math.lcm(len(p.anchor), len(q.anchor))
    for k, (a, b) in enumerate(zip(p.iter_symbols(), q.iter_symbols())):
        if a != b:
            return k
        if k + 1 >= horizon:
            return None
    raise AssertionError  # pragma: no cover


def distance(metric: Metric, p: Point, q: Point) -> float:
    metric = Metric.parse(metric)
    if metric.is_sequence:
        if not (isinstance(p, SequencePoint) and isinstance(q, SequencePoint)):
            raise KindMismatch("seq2k metric needs sequence points")
        k = seq_agreement(p, q)
        return 0.0 if k is None else math.ldexp(1.0, -k)
    if isinstance(p, SequencePoint) or isinstance(q, SequencePoint):
        raise KindMismatch(f"{metric.value} metric needs euclidean points")
    if len(p) != len(q):
        raise KindMismatch(f"dimension mismatch: {len(p)} vs {len(q)}")
    diffs = [abs(a - b) for a, b in zip(p, q)]
    if metric is Metric.L1:
        return math.fsum(diffs)
    if metric is Metric.L2:
        return math.sqrt(math.fsum(d * d for d in diffs))
    return max(diffs)


def distance_batch(metric: Metric, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Row-wise euclidean distances for (m, d) arrays."""
    D = np.abs(np.asarray(P, float) - np.asarray(Q, float))
    if metric is Metric.L1:
        return D.sum(axis=1)
    if metric is Metric.L2:
        return np.sqrt((D * D).sum(axis=1))
    if metric is Metric.LINF:
        return D.max(axis=1)
    raise KindMismatch("batch distances are only defined for euclidean metrics")


def seq_distance_truncation_bound(p: SequencePoint, q: SequencePoint) -> float:
    """Upper bound on the error of `distance` caused by finite stored depth."""
    return math.ldexp(1.0, -min(p.depth, q.depth))


def two_sided_distance(past_agreement: Optional[int], future_agreement: Optional[int] = None) -> float:
    """(1/2)^k with k the largest integer such that s_i = s'_i for all |i| < k.

    Arguments count agreeing positions going backwards from 0 and forwards from 1;
    None means agreement forever. With no future given, futures are taken equal.
    """
    k_past = math.inf if past_agreement is None else past_agreement
    # |i| < k requires positions 0..-(k-1) and 1..k-1
    k_future = math.inf if future_agreement is None else future_agreement + 1
    k = min(k_past, k_future)
    return 0.0 if k == math.inf else math.ldexp(1.0, -int(k))
