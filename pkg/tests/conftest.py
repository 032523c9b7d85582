"""Independent oracles shared by the test modules.

Nothing here imports the spectral or dynamics code: spectra come from closed
forms, Cheeger ratios from plain itertools enumeration, and partitions from
a direct 3^N labelling sweep.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import strategies as st

from consensus_scale.graph_core import Graph


# -- closed-form Laplacian spectra -----------------------------------------

def path_spectrum(n):
    return np.sort([2 - 2 * math.cos(k * math.pi / n) for k in range(n)])


def ring_spectrum(n):
    return np.sort([2 - 2 * math.cos(2 * math.pi * k / n) for k in range(n)])


def star_spectrum(n):
    return np.array([0.0] + [1.0] * (n - 2) + [float(n)])


def complete_spectrum(n):
    return np.array([0.0] + [float(n)] * (n - 1))


def torus_lambda2(rows, cols):
    return 2 - 2 * math.cos(2 * math.pi / max(rows, cols))


# -- random graphs ---------------------------------------------------------

def random_connected_graph(rng, n, p=0.3, weighted=False, w_range=(0.2, 3.0)):
    """Random spanning tree plus Erdos-Renyi extras; always connected."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        parent = order[rng.integers(0, k)]
        edges.add(tuple(sorted((int(order[k]), int(parent)))))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.add((i, j))
    edges = sorted(edges)
    if weighted:
        weights = rng.uniform(*w_range, size=len(edges)).tolist()
    else:
        weights = [1.0] * len(edges)
    return Graph.from_edges(n, edges, weights)


@st.composite
def connected_graphs(draw, min_nodes=2, max_nodes=9, weighted=True):
    n = draw(st.integers(min_nodes, max_nodes))
    edges = set()
    for k in range(1, n):
        parent = draw(st.integers(0, k - 1))
        edges.add((parent, k))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in edges]
    if pairs:
        extra = draw(st.lists(st.sampled_from(pairs), max_size=min(len(pairs), 2 * n), unique=True))
        edges.update(extra)
    edges = sorted(edges)
    if weighted:
        weights = draw(st.lists(st.floats(0.1, 5.0, allow_nan=False), min_size=len(edges),
                                max_size=len(edges)))
    else:
        weights = [1.0] * len(edges)
    return Graph.from_edges(n, edges, weights)


# -- brute-force Cheeger ratios --------------------------------------------

def brute_cheeger(n, edges, weights):
    """(vertex-boundary ratio, edge-cut conductance) by itertools enumeration."""
    deg = [0.0] * n
    nbrs = [set() for _ in range(n)]
    for (i, j), w in zip(edges, weights):
        deg[i] += w
        deg[j] += w
        nbrs[i].add(j)
        nbrs[j].add(i)
    total = sum(deg)
    best_h = best_phi = math.inf
    for size in range(1, n):
        for subset in itertools.combinations(range(n), size):
            s = set(subset)
            vol = sum(deg[v] for v in s)
            denom = min(vol, total - vol)
            boundary = {u for v in s for u in nbrs[v]} - s
            h = sum(deg[u] for u in boundary) / denom
            cut = sum(w for (i, j), w in zip(edges, weights) if (i in s) != (j in s))
            best_h = min(best_h, h)
            best_phi = min(best_phi, cut / denom)
    return best_h, best_phi


# -- exhaustive bottleneck partitions --------------------------------------

def all_partitions(n, edges, weights):
    """Every valid (X1, X2, X3) labelling with the Rayleigh-quotient bound.

    Yields arrays ``labels`` (K, n) with values 1, 2, 3 and ``exact`` (K,),
    computed independently of the library code. Mirror labellings
    (X1 <-> X3) are both kept.
    """
    codes = np.arange(3 ** n)
    labels = np.empty((codes.size, n), dtype=np.int8)
    c = codes.copy()
    for k in range(n):
        labels[:, k] = c % 3 + 1
        c //= 3
    ok = np.all(np.any(labels[:, :, None] == np.arange(1, 4)[None, None, :], axis=1), axis=1)
    d12 = np.zeros(codes.size)
    d32 = np.zeros(codes.size)
    has1 = np.zeros((codes.size, n), dtype=bool)
    has3 = np.zeros((codes.size, n), dtype=bool)
    for (i, j), w in zip(edges, weights):
        li, lj = labels[:, i], labels[:, j]
        ok &= ~(((li == 1) & (lj == 3)) | ((li == 3) & (lj == 1)))
        for a, b, lb in ((i, j, lj), (j, i, li)):
            x2 = labels[:, a] == 2
            has1[:, a] |= x2 & (lb == 1)
            has3[:, a] |= x2 & (lb == 3)
        touches = (li == 2) | (lj == 2)
        other = np.where(li == 2, lj, li)
        d12 += w * (touches & (other == 1))
        d32 += w * (touches & (other == 3))
    x2 = labels == 2
    ok &= np.all(~x2 | (has1 & has3), axis=1)
    labels, d12, d32 = labels[ok], d12[ok], d32[ok]
    n1 = np.sum(labels == 1, axis=1).astype(float)
    n3 = np.sum(labels == 3, axis=1).astype(float)
    exact = (n3 ** 2 * d12 + n1 ** 2 * d32) / (n3 ** 2 * n1 + n1 ** 2 * n3)
    return labels, exact


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
