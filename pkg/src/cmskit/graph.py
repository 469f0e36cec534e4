"""Finite directed multigraphs (V, E, i, t) with vertices numbered 1..N."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import NotIrreducible, SemanticError


@dataclass(frozen=True)
class Edge:
    id: str
    source: int
    target: int


@dataclass(frozen=True)
class DirectedMultigraph:
    vertex_count: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        if self.vertex_count < 1:
            raise SemanticError("vertex_count must be positive")
        if not self.edges:
            raise SemanticError("edge list is empty")
        seen = set()
        for e in self.edges:
            if e.id in seen:
                raise SemanticError(f"duplicate edge id {e.id!r}")
            seen.add(e.id)
            for end in (e.source, e.target):
                if not 1 <= end <= self.vertex_count:
                    raise SemanticError(
                        f"edge {e.id!r}: vertex {end} outside 1..{self.vertex_count}"
                    )
        missing = set(range(1, self.vertex_count + 1)) - {e.source for e in self.edges}
        if missing:
            raise SemanticError(
                f"source map is not surjective; vertices without outgoing edges: {sorted(missing)}"
            )

    @classmethod
    def from_triples(cls, vertex_count: int, triples) -> "DirectedMultigraph":
        return cls(vertex_count, tuple(Edge(str(i), s, t) for i, s, t in triples))

    @cached_property
    def edge_index(self) -> dict[str, int]:
        return {e.id: k for k, e in enumerate(self.edges)}

    @cached_property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.edges)

    def edge(self, edge_id: str) -> Edge:
        return self.edges[self.edge_index[edge_id]]

    def source(self, edge_id: str) -> int:
        return self.edge(edge_id).source

    def target(self, edge_id: str) -> int:
        return self.edge(edge_id).target

    @cached_property
    def _out(self) -> dict[int, tuple[Edge, ...]]:
        out: dict[int, list[Edge]] = {v: [] for v in self.vertices}
        for e in self.edges:
            out[e.source].append(e)
        return {v: tuple(es) for v, es in out.items()}

    @cached_property
    def _in(self) -> dict[int, tuple[Edge, ...]]:
        inc: dict[int, list[Edge]] = {v: [] for v in self.vertices}
        for e in self.edges:
            inc[e.target].append(e)
        return {v: tuple(es) for v, es in inc.items()}

    def out_edges(self, vertex: int) -> tuple[Edge, ...]:
        """Edges e with i(e) = vertex, in declared order."""
        return self._out[vertex]

    def in_edges(self, vertex: int) -> tuple[Edge, ...]:
        return self._in[vertex]

    @property
    def vertices(self) -> range:
        return range(1, self.vertex_count + 1)

    def is_admissible(self, word: Sequence[str], start_vertex: Optional[int] = None) -> bool:
        try:
            es = [self.edge(w) for w in word]
        except KeyError:
            return False
        if es and start_vertex is not None and es[0].source != start_vertex:
            return False
        return all(a.target == b.source for a, b in zip(es, es[1:]))

    def compatibility_matrix(self) -> np.ndarray:
        """Edge-adjacency matrix: A[e, f] = 1 iff t(e) = i(f)."""
        src = np.array([e.source for e in self.edges])
        tgt = np.array([e.target for e in self.edges])
        return (tgt[:, None] == src[None, :]).astype(np.int64)

    def vertex_adjacency(self) -> np.ndarray:
        """Vertex matrix counting parallel edges (0-based indices)."""
        A = np.zeros((self.vertex_count, self.vertex_count), dtype=np.int64)
        for e in self.edges:
            A[e.source - 1, e.target - 1] += 1
        return A

    def count_words(self, length: int, start_vertex: Optional[int] = None) -> int:
        """Number of admissible words of the given length (exact integer)."""
        if length < 1:
            return 1
        counts = {v: 1 for v in self.vertices}  # paths of length 0 ending anywhere
        # number of paths of length k starting at v
        for _ in range(length):
            counts = {v: sum(counts[e.target] for e in self.out_edges(v)) for v in self.vertices}
        if start_vertex is None:
            return sum(counts.values())
        return counts[start_vertex]

    def iter_words(self, length: int, start_vertex: Optional[int] = None) -> Iterator[tuple[str, ...]]:
        starts = self.edges if start_vertex is None else self.out_edges(start_vertex)

        def extend(prefix, vertex, remaining):
            if remaining == 0:
                yield prefix
                return
            for e in self.out_edges(vertex):
                yield from extend(prefix + (e.id,), e.target, remaining - 1)

        for e in starts:
            yield from extend((e.id,), e.target, length - 1)

    def shortest_cycle(self, vertex: int) -> tuple[str, ...]:
        """A shortest closed admissible path through `vertex` (BFS); empty if none."""
        parent: dict[int, tuple[int, str]] = {}
        queue = deque()
        for e in self.out_edges(vertex):
            if e.target == vertex:
                return (e.id,)
            if e.target not in parent:
                parent[e.target] = (vertex, e.id)
                queue.append(e.target)
        while queue:
            v = queue.popleft()
            for e in self.out_edges(v):
                if e.target == vertex:
                    path = [e.id]
                    u = v
                    while u != vertex:
                        u, eid = parent[u]
                        path.append(eid)
                    return tuple(reversed(path))
                if e.target not in parent and e.target != vertex:
                    parent[e.target] = (v, e.id)
                    queue.append(e.target)
        return ()


def _reachable(g: DirectedMultigraph, start: int, reverse: bool = False) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        nbrs = (e.source for e in g.in_edges(v)) if reverse else (e.target for e in g.out_edges(v))
        for u in nbrs:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen


def is_irreducible(g: DirectedMultigraph) -> bool:
    """True iff the digraph is strongly connected."""
    everything = set(g.vertices)
    return _reachable(g, 1) == everything and _reachable(g, 1, reverse=True) == everything


def period(g: DirectedMultigraph, vertex: int = 1) -> int:
    """gcd of 1 + depth(u) - depth(v) over all edges u->v, BFS depths from `vertex`.

    For a strongly connected graph this equals the gcd of all cycle lengths.
    """
    if not is_irreducible(g):
        raise NotIrreducible("period is only defined for irreducible graphs")
    depth = {vertex: 0}
    queue = deque([vertex])
    while queue:
        v = queue.popleft()
        for e in g.out_edges(v):
            if e.target not in depth:
                depth[e.target] = depth[v] + 1
                queue.append(e.target)
    p = 0
    for e in g.edges:
        p = math.gcd(p, abs(depth[e.source] + 1 - depth[e.target]))
    return p


def is_aperiodic(g: DirectedMultigraph) -> bool:
    return period(g) == 1


def admissible_words(
    g: DirectedMultigraph, length: int, start_vertex: Optional[int] = None
) -> list[tuple[str, ...]]:
    """All admissible edge words of `length`, ordered lexicographically by declared edge order."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return list(g.iter_words(length, start_vertex))
