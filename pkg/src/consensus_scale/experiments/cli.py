"""Command-line front end.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .. import __version__
from ..dynamics import ConsensusGains, ConsensusSystem, Disturbance, Grounding, simulate
from ..errors import NumericalError, ValidationError
from ..generators import KINDS, FamilySpec, generate
from ..graph_core import DegreeBounds, format_edgelist, read_edgelist
from ..spectral import CSV_COLUMNS, spectral_report
from .config import ExperimentConfig, default_config, load_config
from .runs import run_formation_demo, run_scaling_sweep, run_third_order_demo, settling_ratios

log = logging.getLogger("consensus_scale")


def _family_spec(args) -> FamilySpec:
    params = {}
    if args.k is not None:
        params["k"] = args.k
    if getattr(args, "bridges", None) is not None:
        params["bridges"] = args.bridges
    return FamilySpec(args.family, params, args.seed or 0, args.weight)


def _gains(text: str) -> ConsensusGains:
    try:
        return ConsensusGains(tuple(float(x) for x in text.split(",")))
    except ValueError as exc:
        raise ValidationError(f"bad --gains {text!r}: {exc}") from None


def _impulse(text: str) -> Disturbance:
    try:
        t, node, order, value = text.split(":")
        return Disturbance(float(t), int(node), int(order), float(value))
    except ValueError:
        raise ValidationError(f"bad --impulse {text!r}; expected t:node:order:value") from None


def _ground(text: str) -> Grounding:
    try:
        t, node = text.split(":")
        return Grounding(float(t), int(node))
    except ValueError:
        raise ValidationError(f"bad --ground {text!r}; expected t:node") from None


def cmd_generate(args):
    g = generate(_family_spec(args), args.N)
    text = format_edgelist(g)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_spectral(args):
    g = read_edgelist(args.graph, base=args.base)
    bounds = None
    if args.q is not None:
        bounds = DegreeBounds(args.q, args.w_min, args.w_max)
    rep = spectral_report(g, leader=args.leader, bounds=bounds, cheeger_cap=args.cheeger_cap,
                          family=args.family_label, seed=args.seed)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerow(rep.csv_row())
    finally:
        if args.out:
            fh.close()


def cmd_simulate(args):
    if args.graph:
        g = read_edgelist(args.graph, base=args.base)
    elif args.family and args.N:
        g = generate(_family_spec(args), args.N)
    else:
        raise ValidationError("simulate needs --graph or --family with --N")
    system = ConsensusSystem(g, _gains(args.gains), args.leader)
    events = [_impulse(s) for s in args.impulse] + [_ground(s) for s in args.ground]
    traj = simulate(system, None, events, T=args.T, dt=args.dt, record_every=args.record_every)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traj.write_csv(out / "trajectory.csv")
    traj.write_events_csv(out / "events.csv")
    print(f"wrote {out / 'trajectory.csv'} and {out / 'events.csv'}")


def _experiment_config(args, name) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config(name)
    if cfg.name != name:
        raise ValidationError(f"config is for {cfg.name!r}, not {name!r}")
    d = cfg.to_dict()
    if args.seed is not None:
        d["seeds"] = [args.seed]
    if args.seeds:
        d["seeds"] = [int(s) for s in args.seeds.split(",")]
    if args.sizes:
        d["sizes"] = [int(s) for s in args.sizes.split(",")]
    if args.N is not None:
        d["sizes"] = [args.N]
    if args.leader is not None:
        d["leader"] = args.leader
    if args.gains:
        d["gains"] = list(_gains(args.gains).a)
    if args.out:
        d["output_dir"] = args.out
    return ExperimentConfig.from_dict(d)


def cmd_sweep(args):
    cfg = _experiment_config(args, "sweep")
    rows = run_scaling_sweep(cfg)
    print(f"{len(rows)} sweep points written to {cfg.output_dir}")


def cmd_demo(args):
    if args.which == "formation":
        cfg = _experiment_config(args, "formation")
        runs = run_formation_demo(cfg)
        for r in runs:
            ts = "not settled" if r.settling_duration is None else f"{r.settling_duration:.2f} s"
            print(f"N={r.N:<4d} {r.mode:<10s} eigenvalue={r.eigenvalue:.4f} settling={ts}")
        for n, ratio in settling_ratios(runs).items():
            print(f"N={n}: grounded/leaderless settling ratio {ratio:.2f}")
    else:
        cfg = _experiment_config(args, "third-order")
        res = run_third_order_demo(cfg)
        print(f"seed={res.seed} lambda2={res.lambda2:.4f} grounded_lambda1={res.grounded_lambda1:.4f}")
        print(f"max Re eig grounded={res.grounded_max_real:.4f} "
              f"attenuated={res.attenuated} diverged={res.diverged}")
    print(f"outputs in {cfg.output_dir}")


def _add_family_flags(p, required=False):
    p.add_argument("--family", choices=KINDS, required=required)
    p.add_argument("--N", type=int, required=required)
    p.add_argument("--k", type=int, help="degree for random_regular")
    p.add_argument("--bridges", type=int, help="bridge nodes for barbell")
    p.add_argument("--seed", type=int)
    p.add_argument("--weight", type=float, default=1.0)


def _add_experiment_flags(p):
    p.add_argument("--config", help="JSON experiment config (e.g. a previous run's config.json)")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--sizes", help="comma-separated network sizes")
    p.add_argument("--N", type=int)
    p.add_argument("--leader", type=int)
    p.add_argument("--gains", help="comma-separated a_0,...,a_{n-1}")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consensus-scale", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a graph as an edge list")
    _add_family_flags(p, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("spectral", help="spectral report of an edge-list graph as CSV")
    p.add_argument("graph")
    p.add_argument("--leader", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--w-min", type=float, default=1.0)
    p.add_argument("--w-max", type=float, default=1.0)
    p.add_argument("--cheeger-cap", type=int, default=20)
    p.add_argument("--base", type=int, choices=(0, 1))
    p.add_argument("--family-label", default="")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("simulate", help="simulate nth-order consensus with events")
    p.add_argument("--graph")
    p.add_argument("--base", type=int, choices=(0, 1))
    _add_family_flags(p)
    p.add_argument("--gains", default="1")
    p.add_argument("--leader", type=int)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--impulse", action="append", default=[], metavar="t:node:order:value")
    p.add_argument("--ground", action="append", default=[], metavar="t:node")
    p.add_argument("--out", default="simulation")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="lambda_2 scaling sweep (lattice vs random regular)")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("demo", help="formation or third-order demo")
    p.add_argument("which", choices=("formation", "third-order"))
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
