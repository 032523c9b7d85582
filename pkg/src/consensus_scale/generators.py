"""Graph families: deterministic constructions and seeded random regular graphs.

Random kinds draw from ``numpy.random.default_rng(seed)`` (PCG64), so a
``(spec, N)`` pair always yields the same edge set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import InfeasibleSpecError, RetryExhaustedError
from .graph_core import Graph

KINDS = ("path", "ring", "star", "complete", "lattice2d_torus", "binary_tree",
         "barbell", "random_regular")

DEFAULT_MAX_TRIES = 10_000


@dataclass(frozen=True)
class FamilySpec:
    """A graph family.

    ``params`` is kind-specific: ``k`` for ``random_regular``; ``rows`` and/or
    ``cols`` for ``lattice2d_torus`` (square when omitted); ``bridges`` for
    ``barbell`` (clique size follows from N).
    """

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InfeasibleSpecError(f"unknown family {self.kind!r}; expected one of {KINDS}")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise InfeasibleSpecError(f"weight must be positive and finite, got {self.weight}")
        if not 0 <= int(self.seed) < 2**64:
            raise InfeasibleSpecError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "params", dict(self.params))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(sorted(self.params.items())),
                "seed": int(self.seed), "weight": self.weight}

    @classmethod
    def from_dict(cls, d: Mapping) -> "FamilySpec":
        return cls(d["kind"], d.get("params", {}), int(d.get("seed", 0)),
                   float(d.get("weight", 1.0)))

    def with_seed(self, seed: int) -> "FamilySpec":
        return FamilySpec(self.kind, self.params, seed, self.weight)


def generate(spec: FamilySpec, N: int) -> Graph:
    if N < 1:
        raise InfeasibleSpecError(f"N must be positive, got {N}")
    w = spec.weight
    kind = spec.kind
    if kind == "path":
        return Graph.from_edges(N, [(i, i + 1) for i in range(N - 1)], weight=w)
    if kind == "ring":
        if N < 3:
            raise InfeasibleSpecError("a simple ring needs N >= 3")
        return Graph.from_edges(N, [(i, (i + 1) % N) for i in range(N)], weight=w)
    if kind == "star":
        return Graph.from_edges(N, [(0, i) for i in range(1, N)], weight=w)
    if kind == "complete":
        return Graph.from_edges(N, [(i, j) for i in range(N) for j in range(i + 1, N)], weight=w)
    if kind == "binary_tree":
        return Graph.from_edges(N, [((i - 1) // 2, i) for i in range(1, N)], weight=w)
    if kind == "lattice2d_torus":
        rows, cols = _torus_shape(spec.params, N)
        return torus(rows, cols, weight=w)
    if kind == "barbell":
        b = int(spec.params.get("bridges", 1))
        if (N - b) % 2 or (N - b) // 2 < 2:
            raise InfeasibleSpecError(f"barbell with {b} bridge(s) cannot have N={N}")
        return generate_barbell((N - b) // 2, b, weight=w)
    if kind == "random_regular":
        if "k" not in spec.params:
            raise InfeasibleSpecError("random_regular needs parameter k")
        return generate_random_regular(
            N, int(spec.params["k"]), spec.seed, weight=w,
            max_tries=int(spec.params.get("max_tries", DEFAULT_MAX_TRIES)))
    raise AssertionError(kind)


def _torus_shape(params, N):
    rows, cols = params.get("rows"), params.get("cols")
    if rows is None and cols is None:
        side = math.isqrt(N)
        rows = cols = side
    elif rows is None:
        rows = N // int(cols)
    elif cols is None:
        cols = N // int(rows)
    rows, cols = int(rows), int(cols)
    if rows * cols != N:
        raise InfeasibleSpecError(f"torus shape {rows}x{cols} does not have {N} nodes")
    if rows < 3 or cols < 3:
        raise InfeasibleSpecError("torus sides must be >= 3 for a simple 4-regular graph")
    return rows, cols


def torus(rows: int, cols: int, weight: float = 1.0) -> Graph:
    """Periodic 2D lattice; every node has exactly 4 neighbours."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            edges.append((u, r * cols + (c + 1) % cols))
            edges.append((u, ((r + 1) % rows) * cols + c))
    return Graph.from_edges(rows * cols, edges, weight=weight)


def generate_random_regular(N: int, k: int, seed: int = 0, weight: float = 1.0,
                            max_tries: int = DEFAULT_MAX_TRIES) -> Graph:
    """Simple connected k-regular graph from the pairing (configuration) model.

    Each node gets ``k`` stubs; a uniformly random permutation of the stubs
    pairs them off. Pairings with self-loops or repeated edges, and
    disconnected results, are rejected and redrawn.
    """
    if k < 1 or k >= N:
        raise InfeasibleSpecError(f"need 1 <= k < N, got k={k}, N={N}")
    if (N * k) % 2:
        raise InfeasibleSpecError(f"N*k must be even, got N={N}, k={k}")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(N), k)
    for _ in range(max_tries):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        lo, hi = pairs.min(axis=1), pairs.max(axis=1)
        if np.any(lo == hi):
            continue
        keys = lo * N + hi
        if np.unique(keys).size != keys.size:
            continue
        g = Graph.from_edges(N, zip(lo.tolist(), hi.tolist()), weight=weight)
        if g.is_connected():
            return g
    raise RetryExhaustedError(
        f"no simple connected {k}-regular graph on {N} nodes after {max_tries} pairings")


def generate_barbell(m: int, b: int = 1, weight: float = 1.0) -> Graph:
    """Two K_m cliques joined only through ``b`` bridge nodes.

    Nodes ``0..m-1`` form the first clique, ``m..m+b-1`` are bridges and the
    rest the second clique. Bridge ``t`` attaches to node ``t mod m`` of each
    clique.
    """
    if m < 2 or b < 1:
        raise InfeasibleSpecError(f"barbell needs m >= 2 and b >= 1, got m={m}, b={b}")
    second = m + b
    edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
    edges += [(second + i, second + j) for i in range(m) for j in range(i + 1, m)]
    for t in range(b):
        edges.append((t % m, m + t))
        edges.append((m + t, second + t % m))
    return Graph.from_edges(2 * m + b, edges, weight=weight)
