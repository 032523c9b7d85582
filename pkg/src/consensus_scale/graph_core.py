"""Undirected weighted graphs, Laplacians and bottleneck partitions."""

from __future__ import annotations

import io
import math
import os
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DisconnectedGraphError,
    EmptyX3Error,
    GraphError,
    PartitionError,
    ValidationError,
)

# Relative tolerance for symmetry / zero-row-sum checks, scaled by N * w_max.
ROW_SUM_RTOL = 1e-9


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0 .. node_count - 1``.

    Edges are stored once as ``(i, j)`` with ``i < j``, sorted, with a
    parallel tuple of strictly positive weights. Instances are immutable.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        n = self.node_count
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
            raise GraphError(f"node_count must be a positive integer, got {n!r}")
        if len(self.weights) != len(self.edges):
            raise GraphError("edges and weights differ in length")
        pairs = {}
        for (i, j), w in zip(self.edges, self.weights):
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge ({i}, {j}) references a node outside 0..{n - 1}")
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            w = float(w)
            if not (w > 0 and math.isfinite(w)):
                raise GraphError(f"edge ({i}, {j}) has non-positive or non-finite weight {w}")
            key = (i, j) if i < j else (j, i)
            if key in pairs:
                raise GraphError(f"duplicate edge {key}")
            pairs[key] = w
        ordered = sorted(pairs)
        object.__setattr__(self, "node_count", int(n))
        object.__setattr__(self, "edges", tuple(ordered))
        object.__setattr__(self, "weights", tuple(pairs[e] for e in ordered))

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[Sequence[int]],
                   weights: Iterable[float] | None = None, weight: float = 1.0) -> "Graph":
        edges = [tuple(e) for e in edges]
        if weights is None:
            weights = [weight] * len(edges)
        return cls(node_count, tuple(edges), tuple(weights))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def _weight_map(self) -> dict:
        return dict(zip(self.edges, self.weights))

    @cached_property
    def _neighbors(self) -> tuple[tuple[int, ...], ...]:
        nbrs = [[] for _ in range(self.node_count)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return tuple(tuple(sorted(x)) for x in nbrs)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Dense weighted adjacency matrix (read-only)."""
        a = np.zeros((self.node_count, self.node_count))
        if self.edges:
            idx = np.asarray(self.edges)
            w = np.asarray(self.weights)
            a[idx[:, 0], idx[:, 1]] = w
            a[idx[:, 1], idx[:, 0]] = w
        a.flags.writeable = False
        return a

    def weight(self, i: int, j: int) -> float:
        """Weight of edge ``{i, j}``, 0.0 when absent."""
        key = (i, j) if i < j else (j, i)
        return self._weight_map.get(key, 0.0)

    def has_edge(self, i: int, j: int) -> bool:
        return self.weight(i, j) > 0.0

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._neighbors[i]

    @cached_property
    def neighbor_counts(self) -> np.ndarray:
        """|N_i| for every node."""
        return np.array([len(x) for x in self._neighbors], dtype=int)

    @cached_property
    def degrees(self) -> np.ndarray:
        """Weighted degrees d_i = sum_j w_ij."""
        return self.adjacency.sum(axis=1)

    @property
    def max_weight(self) -> float:
        return max(self.weights, default=0.0)

    @property
    def min_weight(self) -> float:
        return min(self.weights, default=0.0)

    def is_connected(self) -> bool:
        return len(self.component(0)) == self.node_count

    def component(self, start: int) -> set[int]:
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in self._neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen

    def require_connected(self):
        if not self.is_connected():
            raise DisconnectedGraphError(
                f"graph with {self.node_count} nodes is not connected")

    def check_node(self, node: int, what: str = "node") -> int:
        if isinstance(node, bool) or not isinstance(node, (int, np.integer)):
            raise ValidationError(f"{what} must be an integer node id, got {node!r}")
        if not 0 <= node < self.node_count:
            raise ValidationError(f"{what} {node} outside 0..{self.node_count - 1}")
        return int(node)


@dataclass(frozen=True)
class DegreeBounds:
    """Bounded neighbourhood size ``q`` and edge weight range."""

    q: int
    w_min: float = 1.0
    w_max: float = 1.0

    def __post_init__(self):
        if self.q < 1:
            raise ValidationError(f"q must be >= 1, got {self.q}")
        if not (0 < self.w_min <= self.w_max < math.inf):
            raise ValidationError(
                f"need 0 < w_min <= w_max < inf, got {self.w_min}, {self.w_max}")

    @classmethod
    def tight(cls, g: Graph) -> "DegreeBounds":
        """Smallest bounds the graph satisfies."""
        if not g.edges:
            raise ValidationError("edgeless graph has no weight bounds")
        return cls(int(g.neighbor_counts.max()), g.min_weight, g.max_weight)


def build_laplacian(g: Graph) -> np.ndarray:
    """Weighted Laplacian ``L = D - W`` as a read-only dense array.

    Off-diagonals are written in mirrored pairs so ``L`` is bit-exactly
    symmetric.
    """
    n = g.node_count
    lap = np.zeros((n, n))
    for (i, j), w in zip(g.edges, g.weights):
        lap[i, j] = -w
        lap[j, i] = -w
    np.fill_diagonal(lap, g.adjacency.sum(axis=1))
    lap.flags.writeable = False
    return lap


def grounded_laplacian(g: Graph, leader: int = 0) -> np.ndarray:
    """Principal submatrix of ``L`` with the leader's row and column removed."""
    leader = g.check_node(leader, "leader")
    if g.node_count < 2:
        raise ValidationError("grounding needs at least two nodes")
    keep = np.array([k for k in range(g.node_count) if k != leader])
    sub = build_laplacian(g)[np.ix_(keep, keep)]
    sub.flags.writeable = False
    return sub


def follower_index(node_count: int, leader: int) -> np.ndarray:
    """Original node ids that survive grounding, in grounded-matrix order."""
    return np.array([k for k in range(node_count) if k != leader], dtype=int)


@dataclass(frozen=True)
class AssumptionReport:
    degree_violations: tuple[tuple[int, int], ...] = ()
    weight_violations: tuple[tuple[int, int, float], ...] = ()

    @property
    def compliant(self) -> bool:
        return not self.degree_violations and not self.weight_violations


def validate_assumptions(g: Graph, b: DegreeBounds) -> AssumptionReport:
    """List nodes with more than ``q`` neighbours and out-of-range edge weights."""
    deg = tuple((i, int(c)) for i, c in enumerate(g.neighbor_counts) if c > b.q)
    wts = tuple((i, j, w) for (i, j), w in zip(g.edges, g.weights)
                if not (b.w_min <= w <= b.w_max))
    return AssumptionReport(deg, wts)


@dataclass(frozen=True)
class Partition:
    """Disjoint split ``(X1, X2, X3)`` of the vertex set; X2 separates X1 from X3."""

    X1: frozenset
    X2: frozenset
    X3: frozenset

    @property
    def N1(self) -> int:
        return len(self.X1)

    @property
    def N2(self) -> int:
        return len(self.X2)

    @property
    def N3(self) -> int:
        return len(self.X3)

    def validate(self, g: Graph):
        """Raise ``PartitionError`` unless this is a valid bottleneck split of ``g``."""
        parts = (self.X1, self.X2, self.X3)
        if any(not p for p in parts):
            raise PartitionError("X1, X2 and X3 must all be non-empty")
        if (self.X1 & self.X2) or (self.X1 & self.X3) or (self.X2 & self.X3):
            raise PartitionError("parts overlap")
        if self.X1 | self.X2 | self.X3 != frozenset(range(g.node_count)):
            raise PartitionError("parts do not cover the vertex set")
        for i, j in g.edges:
            if (i in self.X1 and j in self.X3) or (i in self.X3 and j in self.X1):
                raise PartitionError(f"edge ({i}, {j}) joins X1 and X3 directly")
        for v in self.X2:
            nb = g.neighbors(v)
            if not any(u in self.X1 for u in nb) or not any(u in self.X3 for u in nb):
                raise PartitionError(f"X2 node {v} lacks a neighbour in X1 or X3")


def vertex_boundary(g: Graph, nodes: Iterable[int]) -> frozenset:
    """Nodes outside ``nodes`` adjacent to at least one node inside."""
    inside = set(nodes)
    return frozenset(v for u in inside for v in g.neighbors(u) if v not in inside)


def find_partition_boundary(g: Graph, X1_seed: Iterable[int]) -> Partition:
    """Canonical bottleneck split grown from a seed set.

    ``X2`` is the vertex boundary of the seed and ``X3`` the remainder.
    Boundary nodes with no neighbour in ``X3`` are absorbed into ``X1``;
    this keeps ``X2 = boundary(X1)`` and makes both partition invariants hold.
    """
    x1 = set(X1_seed)
    if not x1:
        raise PartitionError("X1 seed must be non-empty")
    for v in x1:
        g.check_node(v, "seed node")
    g.require_connected()
    x2 = set(vertex_boundary(g, x1))
    x3 = set(range(g.node_count)) - x1 - x2
    if not x3:
        raise EmptyX3Error("closed neighbourhood of the seed covers the graph")
    stranded = {v for v in x2 if not any(u in x3 for u in g.neighbors(v))}
    x1 |= stranded
    x2 -= stranded
    p = Partition(frozenset(x1), frozenset(x2), frozenset(x3))
    p.validate(g)
    return p


@dataclass(frozen=True)
class BottleneckBound:
    exact: float
    loose: float
    d12: float
    d32: float


def bottleneck_bound(g: Graph, p: Partition, b: DegreeBounds) -> BottleneckBound:
    """Rayleigh-quotient bound on ``lambda_2`` for a bottleneck partition.

    ``exact`` uses the actual cut weights d12, d32 with the test vector
    ``(N3 on X1, 0 on X2, -N1 on X3)``; ``loose`` is ``q w_max N2 / min(N1, N3)``.
    """
    p.validate(g)
    d12 = d32 = 0.0
    for (i, j), w in zip(g.edges, g.weights):
        if i in p.X2 or j in p.X2:
            other = j if i in p.X2 else i
            if other in p.X1:
                d12 += w
            elif other in p.X3:
                d32 += w
    n1, n2, n3 = p.N1, p.N2, p.N3
    exact = (n3 * n3 * d12 + n1 * n1 * d32) / (n3 * n3 * n1 + n1 * n1 * n3)
    loose = b.q * b.w_max * n2 / min(n1, n3)
    return BottleneckBound(exact, loose, d12, d32)


# -- edge-list text format -------------------------------------------------

def format_edgelist(g: Graph, base: int = 0) -> str:
    """One ``i j w`` line per edge. A ``nodes`` header is written only when the
    node count cannot be inferred from the largest label (isolated tail nodes)."""
    lines = []
    if not g.edges or max(j for _, j in g.edges) + 1 != g.node_count:
        lines.append(f"nodes {g.node_count}")
    if base:
        lines.append(f"base {base}")
    lines += [f"{i + base} {j + base} {w!r}" for (i, j), w in zip(g.edges, g.weights)]
    return "\n".join(lines) + "\n"


def parse_edgelist(text: str, base: int | None = None) -> Graph:
    """Parse ``i j [w]`` lines with ``#`` comments.

    Header lines ``nodes N`` and ``base 0|1`` are optional; the ``base``
    argument, when given, overrides the header. Without ``nodes`` the node
    count is inferred from the largest label.
    """
    declared = None
    header_base = 0
    edges, weights = [], []
    for lineno, raw in enumerate(io.StringIO(text), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "nodes":
            declared = _parse_int(tok, 1, lineno)
            continue
        if tok[0] == "base":
            header_base = _parse_int(tok, 1, lineno)
            continue
        if len(tok) not in (2, 3):
            raise GraphError(f"line {lineno}: expected 'i j [w]', got {line!r}")
        try:
            i, j = int(tok[0]), int(tok[1])
            w = float(tok[2]) if len(tok) == 3 else 1.0
        except ValueError as exc:
            raise GraphError(f"line {lineno}: {exc}") from None
        edges.append((i, j))
        weights.append(w)
    offset = header_base if base is None else base
    if offset not in (0, 1):
        raise GraphError(f"label base must be 0 or 1, got {offset}")
    edges = [(i - offset, j - offset) for i, j in edges]
    if declared is None:
        if not edges:
            raise GraphError("empty edge list without a 'nodes' header")
        declared = max(max(e) for e in edges) + 1
    return Graph.from_edges(declared, edges, weights)


def _parse_int(tok, k, lineno):
    try:
        return int(tok[k])
    except (IndexError, ValueError):
        raise GraphError(f"line {lineno}: malformed header {' '.join(tok)!r}") from None


def write_edgelist(g: Graph, path: str | os.PathLike, base: int = 0):
    with open(path, "w", newline="\n") as fh:
        fh.write(format_edgelist(g, base))


def read_edgelist(path: str | os.PathLike, base: int | None = None) -> Graph:
    with open(path) as fh:
        return parse_edgelist(fh.read(), base)
