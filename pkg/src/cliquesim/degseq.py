"""Degree-sequence toolkit: graphicality testing, graph construction, and an
independent exhaustive oracle used to cross-validate both.

All functions are total over integer degree demands: degrees larger than the
number of nodes are accepted and simply reported unrealizable.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

BRUTE_FORCE_MAX_NODES = 8

__all__ = [
    "DegreeSequence",
    "RealizedGraph",
    "RealizationOutcome",
    "erdos_gallai",
    "havel_hakimi",
    "brute_force_realizable",
    "verify_degrees",
    "BRUTE_FORCE_MAX_NODES",
]


@dataclass(frozen=True)
class DegreeSequence:
    """Per-node degree demands: one (node_id, degree) pair per node."""

    entries: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        ids = [i for i, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be distinct")
        for i, d in self.entries:
            if i < 1:
                raise ValueError(f"node id {i} must be >= 1")
            if d < 0:
                raise ValueError(f"degree {d} of node {i} must be >= 0")

    @classmethod
    def from_degrees(cls, degrees: Iterable[int]) -> "DegreeSequence":
        """Build a sequence with implicit node ids 1..n."""
        return cls(tuple((i + 1, int(d)) for i, d in enumerate(degrees)))

    @classmethod
    def coerce(cls, seq: "DegreeSequence | Iterable[int]") -> "DegreeSequence":
        if isinstance(seq, DegreeSequence):
            return seq
        return cls.from_degrees(seq)

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.entries)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class RealizedGraph:
    """Simple labeled graph: node ids plus a set of unordered id pairs."""

    node_ids: tuple[int, ...]
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        known = set(self.node_ids)
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (u < v):
                raise ValueError(f"edge ({u}, {v}) must be stored as (min, max)")
            if u not in known or v not in known:
                raise ValueError(f"edge ({u}, {v}) references unknown node")

    def degree_of(self, node_id: int) -> int:
        return sum(1 for e in self.edges if node_id in e)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class RealizationOutcome:
    """Result of a construction attempt: a graph, or unrealizable."""

    graph: RealizedGraph | None

    @property
    def realizable(self) -> bool:
        return self.graph is not None

    @classmethod
    def unrealizable(cls) -> "RealizationOutcome":
        return cls(graph=None)


def erdos_gallai(seq: DegreeSequence | Iterable[int]) -> bool:
    """Return True iff the degree demands admit a simple graph.

    Checks the even-sum condition plus the k-prefix inequality for every
    k in [1, n] on the non-increasingly sorted degrees.
    """
    degs = sorted(DegreeSequence.coerce(seq).degrees, reverse=True)
    n = len(degs)
    if n == 0:
        return True
    if sum(degs) % 2 != 0:
        return False
    for k in range(1, n + 1):
        lhs = sum(degs[:k])
        rhs = k * (k - 1) + sum(min(d, k) for d in degs[k:])
        if lhs > rhs:
            return False
    return True


def havel_hakimi(seq: DegreeSequence | Iterable[int]) -> RealizationOutcome:
    """Construct a graph meeting the per-node degree demands, or report
    unrealizable.

    Deterministic: each step peels the maximum-degree node, degree ties
    broken by ascending node id, and connects it to the next-largest
    remaining nodes under the same ordering.
    """
    seq = DegreeSequence.coerce(seq)
    residual = [(d, i) for i, d in seq.entries]
    edges: set[tuple[int, int]] = set()
    while residual:
        residual.sort(key=lambda pair: (-pair[0], pair[1]))
        d, v = residual.pop(0)
        if d == 0:
            break  # all remaining demands are zero
        if d > len(residual):
            return RealizationOutcome.unrealizable()
        for k in range(d):
            dk, w = residual[k]
            if dk - 1 < 0:
                return RealizationOutcome.unrealizable()
            residual[k] = (dk - 1, w)
            edges.add((min(v, w), max(v, w)))
    graph = RealizedGraph(node_ids=seq.node_ids, edges=frozenset(edges))
    return RealizationOutcome(graph=graph)


def verify_degrees(graph: RealizedGraph, seq: DegreeSequence | Iterable[int]) -> bool:
    """True iff the graph realizes the demands exactly, node id by node id."""
    seq = DegreeSequence.coerce(seq)
    if set(graph.node_ids) != set(seq.node_ids):
        return False
    counts = {i: 0 for i in graph.node_ids}
    for u, v in graph.edges:
        counts[u] += 1
        counts[v] += 1
    return all(counts[i] == d for i, d in seq.entries)


@functools.lru_cache(maxsize=None)
def _realizable_multisets(n: int) -> frozenset[tuple[int, ...]]:
    """All degree multisets (sorted descending) realizable on n labeled nodes,
    found by enumerating every edge subset of the complete graph.

    Vectorized over subsets: O(2^C(n,2)) graphs, chunked to bound memory.
    """
    if n == 0:
        return frozenset({()})
    edge_list = list(combinations(range(n), 2))
    m = len(edge_list)
    incidence = np.zeros(n, dtype=np.uint32)
    for bit, (u, v) in enumerate(edge_list):
        incidence[u] |= np.uint32(1 << bit)
        incidence[v] |= np.uint32(1 << bit)
    found: set[tuple[int, ...]] = set()
    chunk = 1 << min(m, 20)
    for start in range(0, 1 << m, chunk):
        masks = np.arange(start, start + chunk, dtype=np.uint32)
        degs = np.empty((masks.size, n), dtype=np.uint8)
        for v in range(n):
            degs[:, v] = np.bitwise_count(masks & incidence[v])
        degs.sort(axis=1)
        for row in np.unique(degs, axis=0):
            found.add(tuple(int(x) for x in row[::-1]))
    return frozenset(found)


def brute_force_realizable(seq: DegreeSequence | Iterable[int]) -> bool:
    """Exhaustive realizability oracle, independent of the analytic tests.

    Enumerates every labeled simple graph on len(seq) nodes and checks
    whether any has the demanded degree multiset. Capped at
    BRUTE_FORCE_MAX_NODES nodes.
    """
    seq = DegreeSequence.coerce(seq)
    n = len(seq)
    if n > BRUTE_FORCE_MAX_NODES:
        raise ValueError(
            f"brute-force oracle capped at {BRUTE_FORCE_MAX_NODES} nodes, got {n}"
        )
    if any(d >= n for d in seq.degrees):
        return False  # a simple graph cannot exceed degree n-1
    target = tuple(sorted(seq.degrees, reverse=True))
    return target in _realizable_multisets(n)
