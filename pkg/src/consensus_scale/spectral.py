"""Laplacian spectra, grounded eigenvalues, Cheeger constants and expander trends."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .eigensolver import eig_symmetric
from .errors import DisconnectedGraphError, ValidationError
from .generators import FamilySpec, generate
from .graph_core import DegreeBounds, Graph, build_laplacian, grounded_laplacian

DISCONNECT_THRESHOLD = 1e-8
CHEEGER_CAP = 20
TREND_SLOPE_THRESHOLD = -0.25

CSV_COLUMNS = ("N", "family", "seed", "lambda2", "grounded_lambda1", "lemma2_bound",
               "normalized_lambda2", "cheeger", "residual")


def laplacian_spectrum(g: Graph, method: str = "lapack") -> np.ndarray:
    return eig_symmetric(build_laplacian(g), method=method, vectors=False).values


def _second_smallest(g: Graph, values: np.ndarray) -> float:
    if g.node_count < 2:
        raise ValidationError("algebraic connectivity needs at least two nodes")
    lam2 = float(values[1])
    if lam2 < DISCONNECT_THRESHOLD and not g.is_connected():
        raise DisconnectedGraphError(f"graph is disconnected (lambda_2 = {lam2:.3e})")
    return lam2


def algebraic_connectivity(g: Graph) -> float:
    """Second-smallest Laplacian eigenvalue (Fiedler value)."""
    return _second_smallest(g, laplacian_spectrum(g))


def grounded_eigenvalue(g: Graph, leader: int = 0) -> float:
    """Smallest eigenvalue of the grounded Laplacian."""
    g.require_connected()
    sub = grounded_laplacian(g, leader)
    return float(eig_symmetric(sub, vectors=False).values[0])


def normalized_laplacian(g: Graph) -> np.ndarray:
    """``D^{-1/2} L D^{-1/2}`` with weighted degrees."""
    d = g.degrees
    if np.any(d <= 0):
        raise DisconnectedGraphError("normalized Laplacian undefined with isolated nodes")
    s = 1.0 / np.sqrt(d)
    m = build_laplacian(g) * np.outer(s, s)
    return 0.5 * (m + m.T)


def normalized_lambda2(g: Graph) -> float:
    vals = eig_symmetric(normalized_laplacian(g), vectors=False).values
    return _second_smallest(g, vals)


@dataclass(frozen=True)
class Lemma2Bound:
    loose: float                # q w_max / (N - 1)
    tight: float | None = None  # leader's incident weight / (N - 1)


def lemma2_bound(g: Graph, b: DegreeBounds, leader: int | None = None) -> Lemma2Bound:
    """Upper bounds on the grounded eigenvalue from the all-ones test vector."""
    n = g.node_count
    if n < 2:
        raise ValidationError("bound needs N >= 2")
    loose = b.q * b.w_max / (n - 1)
    if leader is None:
        return Lemma2Bound(loose)
    leader = g.check_node(leader, "leader")
    incident = sum(g.weight(leader, k) for k in g.neighbors(leader))
    return Lemma2Bound(loose, incident / (n - 1))


# -- Cheeger constant ------------------------------------------------------

@dataclass(frozen=True)
class CheegerResult:
    """Degree-volume Cheeger ratios.

    ``value`` follows the vertex-boundary definition: the boundary of ``X`` is
    the set of outside nodes adjacent to ``X``, measured by summed degree.
    ``conductance`` is the edge-cut version (cut weight over the smaller
    volume), the quantity the normalized-Laplacian Cheeger inequality bounds.
    """

    value: float
    witness: frozenset
    conductance: float
    conductance_witness: frozenset


def cheeger_exact(g: Graph, cap: int = CHEEGER_CAP) -> CheegerResult:
    """Exhaustive minimum over all non-empty proper subsets (``N <= cap``)."""
    n = g.node_count
    if n > cap:
        raise ValidationError(
            f"N={n} above brute-force cap {cap}; use cheeger_sweep for an upper bound")
    if n < 2:
        raise ValidationError("Cheeger constant needs N >= 2")
    g.require_connected()
    d = g.degrees
    total = d.sum()
    masks = np.arange(1, (1 << n) - 1, dtype=np.int64)
    adjmask = [sum(1 << j for j in g.neighbors(i)) for i in range(n)]
    vol = np.zeros(masks.size)
    reach = np.zeros(masks.size, dtype=np.int64)
    for i in range(n):
        bit = ((masks >> i) & 1).astype(bool)
        vol += d[i] * bit
        reach |= np.where(bit, adjmask[i], 0)
    boundary = reach & ~masks
    bvol = np.zeros(masks.size)
    for i in range(n):
        bvol += d[i] * ((boundary >> i) & 1)
    cut = np.zeros(masks.size)
    for (i, j), w in zip(g.edges, g.weights):
        cut += w * (((masks >> i) ^ (masks >> j)) & 1)
    denom = np.minimum(vol, total - vol)
    ratio = bvol / denom
    phi = cut / denom
    k, kc = int(np.argmin(ratio)), int(np.argmin(phi))
    return CheegerResult(float(ratio[k]), _mask_set(int(masks[k]), n),
                         float(phi[kc]), _mask_set(int(masks[kc]), n))


def _mask_set(mask, n):
    return frozenset(i for i in range(n) if mask >> i & 1)


def fiedler_vector(g: Graph) -> np.ndarray:
    """Degree-scaled second eigenvector of the normalized Laplacian."""
    res = eig_symmetric(normalized_laplacian(g))
    return res.vectors[:, 1] / np.sqrt(g.degrees)


def cheeger_sweep(g: Graph) -> CheegerResult:
    """Upper bound on both Cheeger ratios from sweep cuts of the Fiedler order.

    Every prefix and every suffix of the sorted Fiedler vector is evaluated;
    the best of these is returned, so the value never falls below the exact
    infimum.
    """
    g.require_connected()
    if g.node_count < 2:
        raise ValidationError("Cheeger constant needs N >= 2")
    order = np.argsort(fiedler_vector(g), kind="stable")
    fwd = _sweep(g, order)
    bwd = _sweep(g, order[::-1])
    best = min(fwd[0], bwd[0], key=lambda t: t[0])
    best_c = min(fwd[1], bwd[1], key=lambda t: t[0])
    return CheegerResult(best[0], best[1], best_c[0], best_c[1])


def _sweep(g, order):
    n = g.node_count
    d = g.degrees
    total = d.sum()
    inside = np.zeros(n, dtype=bool)
    touching = np.zeros(n, dtype=int)
    vol = bvol = cut = 0.0
    best, best_c = (math.inf, frozenset()), (math.inf, frozenset())
    members = []
    for v in order[:-1]:
        v = int(v)
        if touching[v] > 0:
            bvol -= d[v]
        inside[v] = True
        members.append(v)
        vol += d[v]
        for u in g.neighbors(v):
            w = g.weight(u, v)
            if inside[u]:
                cut -= w
            else:
                cut += w
                if touching[u] == 0:
                    bvol += d[u]
            touching[u] += 1
        denom = min(vol, total - vol)
        if bvol / denom < best[0]:
            best = (bvol / denom, frozenset(members))
        if cut / denom < best_c[0]:
            best_c = (cut / denom, frozenset(members))
    return best, best_c


# -- reports ---------------------------------------------------------------

@dataclass(frozen=True)
class SpectralReport:
    N: int
    lambda_all: np.ndarray
    lambda2: float
    normalized_lambda2: float
    lemma2_bound: float
    residual: float
    grounded_lambda1: float | None = None
    leader: int | None = None
    cheeger: float | None = None
    conductance: float | None = None
    family: str = ""
    seed: int | None = None

    def csv_row(self) -> dict:
        def fmt(x):
            return "" if x is None else repr(float(x))
        return {
            "N": str(self.N), "family": self.family,
            "seed": "" if self.seed is None else str(self.seed),
            "lambda2": fmt(self.lambda2), "grounded_lambda1": fmt(self.grounded_lambda1),
            "lemma2_bound": fmt(self.lemma2_bound),
            "normalized_lambda2": fmt(self.normalized_lambda2),
            "cheeger": fmt(self.cheeger), "residual": fmt(self.residual),
        }


def spectral_report(g: Graph, leader: int | None = None, bounds: DegreeBounds | None = None,
                    cheeger_cap: int = CHEEGER_CAP, family: str = "",
                    seed: int | None = None) -> SpectralReport:
    g.require_connected()
    res = eig_symmetric(build_laplacian(g))
    lam2 = _second_smallest(g, res.values)
    bounds = bounds or DegreeBounds.tight(g)
    glam = None
    resid = res.residual
    if leader is not None:
        gres = eig_symmetric(grounded_laplacian(g, leader))
        glam = float(gres.values[0])
        resid = max(resid, gres.residual)
    ch = cheeger_exact(g, cheeger_cap) if g.node_count <= cheeger_cap else None
    return SpectralReport(
        N=g.node_count, lambda_all=res.values, lambda2=lam2,
        normalized_lambda2=normalized_lambda2(g),
        lemma2_bound=lemma2_bound(g, bounds).loose, residual=resid,
        grounded_lambda1=glam, leader=leader,
        cheeger=None if ch is None else ch.value,
        conductance=None if ch is None else ch.conductance,
        family=family, seed=seed)


@dataclass(frozen=True)
class TrendReport:
    sizes: tuple[int, ...]
    lambda2: tuple[float, ...]
    minimum: float
    slope: float
    label: str
    caveat: str = ("heuristic: a finite size sweep cannot prove whether lambda_2 "
                   "stays bounded away from zero as N grows")


def classify_expander_trend(family: FamilySpec, sizes: Sequence[int],
                            slope_threshold: float = TREND_SLOPE_THRESHOLD) -> TrendReport:
    """Fit ``log lambda_2`` against ``log N`` and label the trend.

    Slopes below ``slope_threshold`` are labelled ``decaying-toward-zero``,
    anything flatter ``bounded-away``.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 3:
        raise ValidationError("need at least three sizes")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValidationError("sizes must be strictly ascending")
    lams = [algebraic_connectivity(generate(family, n)) for n in sizes]
    slope = float(np.polyfit(np.log(sizes), np.log(lams), 1)[0])
    label = "decaying-toward-zero" if slope < slope_threshold else "bounded-away"
    return TrendReport(tuple(sizes), tuple(lams), min(lams), slope, label)
