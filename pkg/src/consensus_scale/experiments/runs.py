"""Scaling sweep and the two consensus demos."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..dynamics import (
    ConsensusSystem,
    Disturbance,
    FormationConfig,
    Grounding,
    necessary_condition_high_order,
    settling_time,
    simulate,
    stability_report,
)
from ..errors import RetryExhaustedError
from ..generators import FamilySpec, generate
from ..graph_core import DegreeBounds
from ..spectral import algebraic_connectivity, grounded_eigenvalue, lemma2_bound
from .config import ExperimentConfig, save_config
from .svg import Axes, Series, emit_svg, emit_svg_grid, write_series_csv

log = logging.getLogger(__name__)

THREADS_ENV = "CONSENSUS_SCALE_THREADS"

SWEEP_COLUMNS = ("N", "seed", "lattice_lambda2", "random_lambda2",
                 "random_grounded_lambda1", "lemma2_bound")


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
    return os.cpu_count() or 1


def _r(x) -> str:
    return repr(float(x))


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _prepare(cfg: ExperimentConfig, out_dir) -> Path:
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out)
    return out


# -- scaling sweep ---------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    N: int
    seed: int
    lattice_lambda2: float
    random_lambda2: float
    random_grounded_lambda1: float
    lemma2_bound: float


def _sweep_point(cfg: ExperimentConfig, N: int, seed: int) -> tuple[float, float, float]:
    g = generate(cfg.family.with_seed(seed), N)
    k = int(cfg.family.params["k"])
    bound = lemma2_bound(g, DegreeBounds(k, cfg.family.weight, cfg.family.weight)).loose
    return algebraic_connectivity(g), grounded_eigenvalue(g, cfg.leader), bound


def run_scaling_sweep(cfg: ExperimentConfig, out_dir=None, threads: int | None = None
                      ) -> list[SweepRow]:
    """lambda_2 of 2D tori vs random regular graphs, and the grounded eigenvalue.

    Writes ``sweep.csv`` (one row per size and seed), ``sweep.svg`` and its
    plotted data ``sweep_plot.csv``.
    """
    out = _prepare(cfg, out_dir)
    sizes = [int(n) for n in cfg.sizes]
    lattice_spec = FamilySpec("lattice2d_torus", weight=cfg.family.weight)
    points = [(n, int(s)) for n in sizes for s in cfg.seeds]
    workers = threads or thread_count()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        lattice = dict(zip(sizes, pool.map(
            lambda n: algebraic_connectivity(generate(lattice_spec, n)), sizes)))
        results = list(pool.map(lambda p: _sweep_point(cfg, *p), points))
    rows = [SweepRow(n, s, lattice[n], *res) for (n, s), res in zip(points, results)]
    _write_rows(out / "sweep.csv", SWEEP_COLUMNS,
                [[r.N, r.seed, _r(r.lattice_lambda2), _r(r.random_lambda2),
                  _r(r.random_grounded_lambda1), _r(r.lemma2_bound)] for r in rows])

    def mean_by_size(attr):
        return [float(np.mean([getattr(r, attr) for r in rows if r.N == n])) for n in sizes]

    k = cfg.family.params["k"]
    series = [
        Series("lattice lambda2", sizes, [lattice[n] for n in sizes]),
        Series(f"random {k}-regular lambda2 (mean)", sizes, mean_by_size("random_lambda2")),
        Series("grounded lambda1 (mean)", sizes, mean_by_size("random_grounded_lambda1")),
        Series(f"bound {k} w_max/(N-1)", sizes, mean_by_size("lemma2_bound"), dashed=True),
    ]
    axes = Axes("Algebraic connectivity vs network size", "N", "eigenvalue", "log", "log")
    emit_svg(series, axes, out / "sweep.svg")
    write_series_csv([("sweep", series)], out / "sweep_plot.csv")
    return rows


# -- formation demo --------------------------------------------------------

@dataclass(frozen=True)
class FormationRun:
    N: int
    mode: str           # "leaderless" or "grounded"
    eigenvalue: float   # lambda_2 or grounded lambda_1
    settling_time: float | None
    settling_duration: float | None
    max_undisturbed_deviation: float


def run_formation_demo(cfg: ExperimentConfig, out_dir=None) -> list[FormationRun]:
    """Second-order formations with and without a lead vehicle.

    The state is the error ``x - x*``. Leaderless deviations are measured
    against the instantaneous formation average (a velocity kick shifts the
    common velocity, which relative feedback cannot undo); grounded deviations
    are measured against ``x*`` itself, which the leader tracks exactly.
    """
    out = _prepare(cfg, out_dir)
    d = cfg.disturbance
    dt, T = float(cfg.setting("dt")), float(cfg.setting("horizon"))
    every = int(cfg.setting("record_every"))
    band = float(cfg.setting("band"))
    window = float(cfg.setting("plot_window"))
    plot_every = int(cfg.setting("plot_every"))
    seed = int(cfg.seeds[0])
    v_star, spacing = float(cfg.setting("v_star")), float(cfg.setting("spacing"))
    kick = Disturbance(float(d["time"]), int(d["node"]), int(d["order"]), float(d["value"]))

    runs, panels, traj_rows = [], [], []
    for mode in ("leaderless", "grounded"):
        for N in cfg.sizes:
            g = generate(cfg.family.with_seed(seed), int(N))
            leader = None if mode == "leaderless" else cfg.leader
            sys = ConsensusSystem(g, cfg.gains, leader)
            ref = "average" if leader is None else None
            quiet = simulate(sys, None, (), T=min(T, window), dt=dt, record_every=every)
            still = float(np.max(np.abs(quiet.positions())))
            traj = simulate(sys, None, [kick], T=T, dt=dt, record_every=every)
            ts = settling_time(traj, ref, band)
            lam = algebraic_connectivity(g) if leader is None else grounded_eigenvalue(g, leader)
            runs.append(FormationRun(int(N), mode, lam, ts,
                                     None if ts is None else ts - kick.time, still))
            dev = traj.deviation_from_average() if leader is None else traj.positions()
            fc = FormationConfig(v_star, tuple(-spacing * i for i in range(int(N))))
            pos = fc.absolute_positions(traj)
            keep = np.nonzero(traj.times <= window + 1e-9)[0][::plot_every]
            t = traj.times[keep]
            name = f"{mode}_N{N}"
            series = [Series(None, t, dev[keep, i]) for i in range(traj.node_count)]
            panels.append((name, series, Axes(f"{mode}, N={N}", "t [s]", "x - x* [m]")))
            traj_rows += [[name, _r(tt), i, _r(dev[j, i]), _r(pos[j, i])]
                          for tt, j in zip(t, keep) for i in range(traj.node_count)]

    _write_rows(out / "formation_summary.csv",
                ("N", "mode", "eigenvalue", "settling_time", "settling_duration",
                 "max_undisturbed_deviation"),
                [[r.N, r.mode, _r(r.eigenvalue), "" if r.settling_time is None else _r(r.settling_time),
                  "" if r.settling_duration is None else _r(r.settling_duration),
                  _r(r.max_undisturbed_deviation)] for r in runs])
    _write_rows(out / "formation_trajectories.csv", ("panel", "t", "node", "deviation", "position"),
                traj_rows)
    emit_svg_grid([(s, a) for _, s, a in panels], 2, len(cfg.sizes), out / "formation.svg")
    write_series_csv([(name, s) for name, s, _ in panels], out / "formation_plot.csv")
    return runs


def settling_ratios(runs: list[FormationRun]) -> dict[int, float]:
    """Grounded over leaderless settling duration, per size."""
    by = {(r.N, r.mode): r.settling_duration for r in runs}
    out = {}
    for n in sorted({r.N for r in runs}):
        free, grounded = by.get((n, "leaderless")), by.get((n, "grounded"))
        if free and grounded is not None:
            out[n] = grounded / free
        else:
            out[n] = float("nan")
    return out


# -- third-order demo ------------------------------------------------------

@dataclass(frozen=True)
class ThirdOrderResult:
    seed: int
    lambda2: float
    grounded_lambda1: float
    leaderless_max_real: float
    grounded_max_real: float
    peak: float
    dev_25: float
    dev_31: float
    dev_60: float
    times: np.ndarray
    deviation_norm: np.ndarray

    @property
    def attenuated(self) -> bool:
        return self.dev_25 < 0.1 * self.peak

    @property
    def diverged(self) -> bool:
        return self.dev_60 >= 10.0 * self.dev_31


def _pick_graph(cfg: ExperimentConfig, N: int):
    """First seed (from the configured one upward) whose grounded eigenvalue
    violates the high-order stability condition while the leaderless loop is stable."""
    seed = int(cfg.seeds[0])
    for attempt in range(int(cfg.setting("max_resample")) + 1):
        g = generate(cfg.family.with_seed(seed), N)
        glam = grounded_eigenvalue(g, cfg.leader)
        free = stability_report(ConsensusSystem(g, cfg.gains))
        if not necessary_condition_high_order(cfg.gains, glam) and free.is_stable:
            return seed, g, glam
        log.warning("seed %d rejected (grounded lambda1=%.4f, leaderless stable=%s); resampling",
                    seed, glam, free.is_stable)
        seed += 1
    raise RetryExhaustedError("no seed produced the unstable grounded regime")


def run_third_order_demo(cfg: ExperimentConfig, out_dir=None, require_unstable: bool = True
                         ) -> ThirdOrderResult:
    """Third-order consensus, grounded mid-run.

    Impulse at ``time``, grounding at ``ground_time``, the same impulse again
    at ``repeat_time``. With ``require_unstable=False`` the configured seed is
    used as is (for gain variations where grounding keeps the loop stable).
    """
    out = _prepare(cfg, out_dir)
    d = cfg.disturbance
    N = int(cfg.sizes[0])
    if require_unstable:
        seed, g, glam = _pick_graph(cfg, N)
    else:
        seed = int(cfg.seeds[0])
        g = generate(cfg.family.with_seed(seed), N)
        glam = grounded_eigenvalue(g, cfg.leader)
    sys = ConsensusSystem(g, cfg.gains)
    node, order, value = int(d["node"]), int(d["order"]), float(d["value"])
    t1, tg, t2 = float(d["time"]), float(d["ground_time"]), float(d["repeat_time"])
    T = float(cfg.setting("horizon"))
    events = [Disturbance(t1, node, order, value), Grounding(tg, cfg.leader),
              Disturbance(t2, node, order, value)]
    traj = simulate(sys, None, events, T=T, dt=float(cfg.setting("dt")),
                    record_every=int(cfg.setting("record_every")))
    t = traj.times
    dev = traj.deviation_from_average()
    norm = np.linalg.norm(dev, axis=1)

    def at(time):
        return float(norm[int(np.argmin(np.abs(t - time)))])

    pre = (t >= t1) & (t < tg)
    res = ThirdOrderResult(
        seed=seed, lambda2=algebraic_connectivity(g), grounded_lambda1=glam,
        leaderless_max_real=stability_report(sys).max_real_part,
        grounded_max_real=stability_report(replace(sys, leader=cfg.leader)).max_real_part,
        peak=float(np.max(norm[pre])), dev_25=at(25.0), dev_31=at(t2), dev_60=at(T),
        times=t, deviation_norm=norm)

    _write_rows(out / "third_order_summary.csv",
                ("seed", "lambda2", "grounded_lambda1", "leaderless_max_real", "grounded_max_real",
                 "peak", "dev_25", "dev_31", "dev_60", "attenuated", "diverged"),
                [[res.seed, _r(res.lambda2), _r(res.grounded_lambda1), _r(res.leaderless_max_real),
                  _r(res.grounded_max_real), _r(res.peak), _r(res.dev_25), _r(res.dev_31),
                  _r(res.dev_60), int(res.attenuated), int(res.diverged)]])
    _write_rows(out / "third_order_trajectories.csv", ("t", "node", "deviation"),
                [[_r(tt), i, _r(dev[j, i])] for j, tt in enumerate(t) for i in range(N)])
    series = [Series(None, t, dev[:, i]) for i in range(N)]
    emit_svg(series, Axes("Third-order consensus, grounded at t = %g s" % tg,
                          "t [s]", "x - x_avg"), out / "third_order.svg")
    write_series_csv([("third_order", series)], out / "third_order_plot.csv")
    return res
