"""nth-order consensus: closed-loop assembly, stability, simulation and metrics.

State layout: ``xi = [x^(0), x^(1), ..., x^(n-1)]`` stacked by derivative
order, each block holding one entry per node (per follower once grounded).
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import StepSizeError, UnstableSystemError, ValidationError
from .graph_core import Graph, build_laplacian, follower_index, grounded_laplacian

STABILITY_TOL = 1e-10
STEP_WARN = 1.0
STEP_LIMIT = 2.7  # RK4 real-axis stability boundary is ~2.785


@dataclass(frozen=True)
class ConsensusGains:
    """Gains ``a_0 .. a_{n-1}``; the order ``n`` is ``len(a)``."""

    a: tuple[float, ...]
    a_max: float | None = None

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        if not a:
            raise ValidationError("need at least one gain")
        if any(not math.isfinite(x) or x < 0 for x in a):
            raise ValidationError(f"gains must be finite and nonnegative, got {a}")
        if a[-1] <= 0:
            raise ValidationError("the highest-order gain a_{n-1} must be positive")
        if self.a_max is not None:
            if not self.a_max > 0:
                raise ValidationError("a_max must be positive")
            if max(a) > self.a_max:
                raise ValidationError(f"gain {max(a)} exceeds a_max={self.a_max}")
        object.__setattr__(self, "a", a)

    @property
    def order(self) -> int:
        return len(self.a)


@dataclass(frozen=True)
class ConsensusSystem:
    graph: Graph
    gains: ConsensusGains
    leader: int | None = None

    def __post_init__(self):
        self.graph.require_connected()
        if self.leader is not None:
            object.__setattr__(self, "leader", self.graph.check_node(self.leader, "leader"))

    @property
    def order(self) -> int:
        return self.gains.order

    @property
    def agents(self) -> int:
        """Nodes carrying dynamic state (followers only when grounded)."""
        return self.graph.node_count - (self.leader is not None)

    @property
    def state_dim(self) -> int:
        return self.order * self.agents

    def laplacian(self) -> np.ndarray:
        if self.leader is None:
            return build_laplacian(self.graph)
        return grounded_laplacian(self.graph, self.leader)


def companion(lap: np.ndarray, a: Sequence[float]) -> np.ndarray:
    """Block companion matrix: identity super-diagonal, bottom row ``-a_k * lap``."""
    m = lap.shape[0]
    n = len(a)
    out = np.zeros((n * m, n * m))
    for k in range(n - 1):
        out[k * m:(k + 1) * m, (k + 1) * m:(k + 2) * m] = np.eye(m)
    for k in range(n):
        out[(n - 1) * m:, k * m:(k + 1) * m] = -a[k] * lap
    return out


def build_closed_loop(sys: ConsensusSystem) -> np.ndarray:
    return companion(sys.laplacian(), sys.gains.a)


def disagreement_basis(N: int) -> np.ndarray:
    """Orthonormal basis (N x N-1) of the complement of the all-ones vector."""
    return scipy.linalg.null_space(np.ones((1, N)))


def reduced_closed_loop(sys: ConsensusSystem) -> np.ndarray:
    """Closed loop restricted to the modes that must decay.

    Leaderless systems are projected onto the disagreement subspace, which
    removes the ``n`` consensus modes at the origin; grounded systems are
    returned unchanged.
    """
    lap = sys.laplacian()
    if sys.leader is None:
        q = disagreement_basis(lap.shape[0])
        lap = q.T @ lap @ q
        lap = 0.5 * (lap + lap.T)
    return companion(lap, sys.gains.a)


@dataclass(frozen=True)
class StabilityReport:
    is_stable: bool
    max_real_part: float
    n_zero_modes: int


def stability_report(sys: ConsensusSystem) -> StabilityReport:
    """Eigenvalue test of the closed loop.

    Leaderless: the n consensus modes sit at the origin and the rest must lie
    strictly in the left half-plane. Grounded: every eigenvalue must.
    """
    eig = np.linalg.eigvals(reduced_closed_loop(sys))
    max_re = float(np.max(eig.real)) if eig.size else -math.inf
    if sys.leader is None:
        lap_vals = np.linalg.eigvalsh(build_laplacian(sys.graph))
        nullity = int(np.sum(np.abs(lap_vals) < 1e-9 * max(1.0, lap_vals[-1])))
        zero_modes = sys.order * nullity
    else:
        zero_modes = 0
    return StabilityReport(max_re < -STABILITY_TOL, max_re, zero_modes)


def necessary_condition_high_order(gains: ConsensusGains, lam: float) -> bool:
    """Strict test ``lam > a_{n-3} / (a_{n-1} a_{n-2})``; necessary, not sufficient."""
    n = gains.order
    if n < 3:
        raise ValidationError(f"condition is defined for order >= 3, got {n}")
    a = gains.a
    if a[n - 2] == 0:
        return False
    return lam > a[n - 3] / (a[n - 1] * a[n - 2])


def modal_spectral_radius(lap_values: Iterable[float], a: Sequence[float]) -> float:
    """Largest |s| over roots of ``s^n + sum_k a_k lam s^k`` for each eigenvalue lam."""
    rho = 0.0
    for lam in lap_values:
        coeffs = [1.0] + [a[k] * lam for k in range(len(a) - 1, -1, -1)]
        rho = max(rho, float(np.max(np.abs(np.roots(coeffs)))))
    return rho


# -- simulation ------------------------------------------------------------

@dataclass(frozen=True)
class Disturbance:
    """Additive disturbance on one derivative block.

    With ``duration=None`` the value is added to the state once (impulse);
    otherwise it is held as an input to that block's derivative over
    ``[time, time + duration)``. ``node=None`` means ``value`` is a full
    per-node vector in original node ids.
    """

    time: float
    node: int | None
    order: int
    value: float | Sequence[float]
    duration: float | None = None


@dataclass(frozen=True)
class Grounding:
    time: float
    leader: int


@dataclass(frozen=True)
class EventRecord:
    time: float
    kind: str
    node: int | None
    payload: str


@dataclass
class Segment:
    times: np.ndarray
    states: np.ndarray  # (samples, state_dim)
    leader: int | None


@dataclass
class Trajectory:
    """Sampled states, split into segments at grounding events.

    After grounding, states are follower states relative to the leader's
    state at that instant; the leader then sits at zero in every block.
    """

    order: int
    node_count: int
    dt: float
    segments: list[Segment] = field(default_factory=list)
    events: list[EventRecord] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.concatenate([s.times for s in self.segments])

    @property
    def states(self) -> list[np.ndarray]:
        return [row for s in self.segments for row in s.states]

    @property
    def final_state(self) -> np.ndarray:
        return self.segments[-1].states[-1]

    def block(self, k: int = 0) -> np.ndarray:
        """Derivative block ``k`` as a (samples, N) array in original node order."""
        if not 0 <= k < self.order:
            raise ValidationError(f"derivative order {k} outside 0..{self.order - 1}")
        N = self.node_count
        parts = []
        for seg in self.segments:
            if seg.leader is None:
                parts.append(seg.states[:, k * N:(k + 1) * N])
            else:
                m = N - 1
                full = np.zeros((seg.states.shape[0], N))
                full[:, follower_index(N, seg.leader)] = seg.states[:, k * m:(k + 1) * m]
                parts.append(full)
        return np.vstack(parts)

    def positions(self) -> np.ndarray:
        return self.block(0)

    def deviation_from_average(self) -> np.ndarray:
        x = self.positions()
        return x - x.mean(axis=1, keepdims=True)

    @property
    def last_event_time(self) -> float:
        return max((e.time for e in self.events), default=float(self.segments[0].times[0]))

    def write_csv(self, path: str | os.PathLike):
        """Long format ``t,node,deriv_order,value``; grounded leaders are omitted."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "node", "deriv_order", "value"])
            for seg in self.segments:
                nodes = (range(self.node_count) if seg.leader is None
                         else follower_index(self.node_count, seg.leader))
                m = len(nodes)
                for t, row in zip(seg.times, seg.states):
                    for k in range(self.order):
                        for idx, node in enumerate(nodes):
                            w.writerow([repr(float(t)), int(node), k, repr(float(row[k * m + idx]))])

    def write_events_csv(self, path: str | os.PathLike):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "kind", "node", "payload"])
            for e in self.events:
                w.writerow([repr(float(e.time)), e.kind, "" if e.node is None else e.node, e.payload])


def rk4_step(f, x, dt, u=None):
    k1 = f(x, u)
    k2 = f(x + 0.5 * dt * k1, u)
    k3 = f(x + 0.5 * dt * k2, u)
    k4 = f(x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_step(sys: ConsensusSystem, dt: float):
    vals = np.linalg.eigvalsh(sys.laplacian())
    z = dt * modal_spectral_radius(vals, sys.gains.a)
    if z > STEP_LIMIT:
        raise StepSizeError(f"dt * max|eig| = {z:.3f} exceeds {STEP_LIMIT}; reduce dt")
    if z >= STEP_WARN:
        warnings.warn(f"dt * max|eig| = {z:.3f} >= {STEP_WARN}; RK4 accuracy degraded",
                      RuntimeWarning, stacklevel=3)


def _event_index(t, dt, steps):
    if t < 0:
        raise ValidationError(f"event time {t} is negative")
    idx = math.ceil(t / dt - 1e-9)
    if idx > steps:
        raise ValidationError(f"event time {t} lies beyond the horizon")
    return idx


def simulate(sys: ConsensusSystem, x0=None, events: Sequence = (), T: float = 10.0,
             dt: float = 0.01, record_every: int = 1) -> Trajectory:
    """Fixed-step classical RK4 integration with disturbance and grounding events.

    Events fire at the first grid time ``k * dt`` at or after their timestamp,
    in list order for equal times; the recorded sample at that time is the
    post-event state. Grounding switches to leader-relative coordinates and
    the grounded closed loop.
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if not T >= 0:
        raise ValidationError("T must be nonnegative")
    if record_every < 1:
        raise ValidationError("record_every must be >= 1")
    n = sys.order
    N = sys.graph.node_count
    steps = int(round(T / dt))
    x = np.zeros(sys.state_dim) if x0 is None else np.array(x0, dtype=float).ravel()
    if x.size != sys.state_dim:
        raise ValidationError(f"x0 has {x.size} entries, expected {sys.state_dim}")

    timed = sorted(((_event_index(e.time, dt, steps), i, e) for i, e in enumerate(events)),
                   key=lambda t: (t[0], t[1]))
    holds = []  # (start, end, Disturbance)
    for idx, _, e in timed:
        if isinstance(e, Disturbance):
            if not 0 <= e.order < n:
                raise ValidationError(f"disturbance order {e.order} outside 0..{n - 1}")
            if e.node is not None:
                sys.graph.check_node(e.node, "disturbed node")
            if e.duration is not None:
                if not e.duration > 0:
                    raise ValidationError("hold duration must be positive")
                holds.append((idx, _event_index(e.time + e.duration, dt, steps), e))
        elif not isinstance(e, Grounding):
            raise ValidationError(f"unknown event {e!r}")

    _check_step(sys, dt)
    A = build_closed_loop(sys)
    leader = sys.leader

    def rhs(y, u):
        dy = A @ y
        return dy if u is None else dy + u

    def node_slot(node):
        if leader is None:
            return node
        if node == leader:
            raise ValidationError(f"cannot disturb grounded leader {node}")
        return node if node < leader else node - 1

    def add_to_block(vec, order, node, value):
        m = N - (leader is not None)
        if node is None:
            value = np.asarray(value, dtype=float)
            if value.shape != (N,):
                raise ValidationError(f"disturbance vector needs {N} entries")
            if leader is not None:
                value = value[follower_index(N, leader)]
            vec[order * m:(order + 1) * m] += value
        else:
            vec[order * m + node_slot(node)] += float(value)

    traj = Trajectory(n, N, dt * record_every)
    seg_t, seg_x = [], []
    ev_pos = 0
    for k in range(steps + 1):
        while ev_pos < len(timed) and timed[ev_pos][0] == k:
            _, _, e = timed[ev_pos]
            ev_pos += 1
            t_ev = k * dt
            if isinstance(e, Grounding):
                if leader is not None:
                    raise ValidationError("system is already grounded")
                new_leader = sys.graph.check_node(e.leader, "leader")
                if seg_t:
                    traj.segments.append(Segment(np.array(seg_t), np.array(seg_x), leader))
                    seg_t, seg_x = [], []
                keep = follower_index(N, new_leader)
                x = np.concatenate([x[j * N:(j + 1) * N][keep] - x[j * N + new_leader]
                                    for j in range(n)])
                leader = new_leader
                sys = replace(sys, leader=leader)
                _check_step(sys, dt)
                A = build_closed_loop(sys)
                traj.events.append(EventRecord(t_ev, "grounding", leader, ""))
            elif e.duration is None:
                add_to_block(x, e.order, e.node, e.value)
                traj.events.append(EventRecord(t_ev, "disturbance", e.node,
                                               f"impulse order={e.order} value={_fmt(e.value)}"))
            else:
                traj.events.append(EventRecord(
                    t_ev, "disturbance", e.node,
                    f"hold order={e.order} value={_fmt(e.value)} duration={e.duration!r}"))
        if k % record_every == 0:
            seg_t.append(k * dt)
            seg_x.append(x.copy())
        if k == steps:
            break
        u = None
        for start, end, e in holds:
            if start <= k < end:
                if u is None:
                    u = np.zeros_like(x)
                add_to_block(u, e.order, e.node, e.value)
        x = rk4_step(rhs, x, dt, u)
    if seg_t:
        traj.segments.append(Segment(np.array(seg_t), np.array(seg_x), leader))
    return traj


def _fmt(v):
    if np.ndim(v) == 0:
        return repr(float(v))
    return "[" + " ".join(repr(float(x)) for x in v) + "]"


# -- metrics ---------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeReport:
    holds: bool
    max_violation: float  # largest absolute excess over the envelope (0 if none)
    worst_ratio: float    # max over samples of ||x - avg|| / envelope


def convergence_envelope_check(traj: Trajectory, lambda2: float, a0: float,
                               slack: float = 1e-6) -> EnvelopeReport:
    """Check ``||x(t) - avg|| <= ||x(0) - avg|| exp(-a0 lambda2 t)`` at every sample."""
    if traj.order != 1:
        raise ValidationError(f"envelope applies to first-order runs, got order {traj.order}")
    if traj.events or len(traj.segments) != 1 or traj.segments[0].leader is not None:
        raise ValidationError("envelope applies to leaderless runs without events")
    seg = traj.segments[0]
    t = seg.times - seg.times[0]
    dev = seg.states - seg.states.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(dev, axis=1)
    env = norms[0] * np.exp(-a0 * lambda2 * t)
    floor = 1e-12 * max(1.0, float(np.max(np.abs(seg.states))))
    excess = norms - env * (1.0 + slack) - floor
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(env > floor, norms / env, 0.0)
    return EnvelopeReport(bool(np.all(excess <= 0)), float(max(0.0, np.max(norms - env))),
                          float(np.max(ratio)))


def hinf_first_order(g: Graph, a0: float, leader: int | None = None) -> float:
    """Closed-form H-infinity norm of first-order consensus: ``1 / (a0 * lambda)``."""
    from .spectral import algebraic_connectivity, grounded_eigenvalue

    if not a0 > 0:
        raise ValidationError("a0 must be positive")
    lam = algebraic_connectivity(g) if leader is None else grounded_eigenvalue(g, leader)
    return 1.0 / (a0 * lam)


def _sigma_max(A, m, omega):
    """Largest singular value of C (j omega I - A)^{-1} B, position output, last-block input."""
    dim = A.shape[0]
    rhs = np.zeros((dim, m), dtype=complex)
    rhs[dim - m:, :] = np.eye(m)
    sol = np.linalg.solve(1j * omega * np.eye(dim) - A, rhs)
    return float(np.linalg.norm(sol[:m, :], 2))


def hinf_numeric(sys: ConsensusSystem, points: int = 400, decades: float = 6.0,
                 xtol: float = 1e-10) -> float:
    """H-infinity norm from disturbance to consensus deviation by frequency sweep.

    The disturbance enters the last derivative block; the output is the
    position block, projected off the consensus direction (leaderless) or
    taken relative to the leader (grounded). A log grid centred on
    ``a0 * lambda`` plus ``omega = 0`` locates the peak, and golden-section
    search refines it between the neighbouring grid points.
    """
    A = reduced_closed_loop(sys)
    eig = np.linalg.eigvals(A)
    if np.max(eig.real) >= -STABILITY_TOL:
        raise UnstableSystemError(
            f"closed loop not stable on the disagreement subspace (max Re = {np.max(eig.real):.3e})")
    m = A.shape[0] // sys.order
    lap_vals = np.linalg.eigvalsh(sys.laplacian())
    lam = float(lap_vals[0] if sys.leader is not None else lap_vals[1])
    a = sys.gains.a
    centre = (a[0] if a[0] > 0 else a[-1]) * lam
    grid = np.concatenate([[0.0], np.logspace(math.log10(centre) - decades / 2,
                                              math.log10(centre) + decades / 2, points)])
    vals = np.array([_sigma_max(A, m, w) for w in grid])
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    best = vals[i]
    if hi > lo:
        w, v = _golden_max(lambda w: _sigma_max(A, m, w), lo, hi, xtol * max(centre, 1e-300))
        best = max(best, v)
    return float(best)


def _golden_max(f, a, b, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def settling_time(traj: Trajectory, reference=None, band: float = 0.02,
                  after: float | None = None) -> float | None:
    """First time after the last event from which every node stays within
    ``band * peak`` of its reference, where ``peak`` is the largest deviation
    seen after that event.

    ``reference`` may be ``None`` (zero), ``"average"`` (the instantaneous
    node mean), a per-node vector or a (samples, N) array. The crossing is
    linearly interpolated between samples. Returns ``None`` when the run has
    not settled by the end of the horizon.
    """
    if not 0 < band < 1:
        raise ValidationError("band must lie in (0, 1)")
    t = traj.times
    x = traj.positions()
    if reference is None:
        dev = x
    elif isinstance(reference, str):
        if reference != "average":
            raise ValidationError(f"unknown reference {reference!r}")
        dev = x - x.mean(axis=1, keepdims=True)
    else:
        dev = x - np.asarray(reference, dtype=float)
    t0 = traj.last_event_time if after is None else after
    sel = t >= t0 - 1e-12
    t, err = t[sel], np.max(np.abs(dev[sel]), axis=1)
    if t.size == 0:
        raise ValidationError("no samples after the reference time")
    threshold = band * float(np.max(err))
    outside = np.nonzero(err > threshold)[0]
    if outside.size == 0:
        return float(t0)
    j = int(outside[-1])
    if j == t.size - 1:
        return None
    e0, e1 = err[j], err[j + 1]
    frac = (e0 - threshold) / (e0 - e1) if e0 != e1 else 1.0
    return float(t[j] + frac * (t[j + 1] - t[j]))


@dataclass(frozen=True)
class FormationConfig:
    """Desired trajectories ``x*_i(t) = v_star * t + delta_i``."""

    v_star: float
    delta: tuple[float, ...]

    def reference(self, times: np.ndarray) -> np.ndarray:
        return self.v_star * np.asarray(times)[:, None] + np.asarray(self.delta)[None, :]

    def absolute_positions(self, traj: Trajectory) -> np.ndarray:
        """Positions from a run simulated in error coordinates ``x - x*``."""
        if len(self.delta) != traj.node_count:
            raise ValidationError("delta length must equal the node count")
        return traj.positions() + self.reference(traj.times)
