"""Command-line entry point: ``uavbackhaul {run,sweep,check,oracle}``.

Exit codes: 0 success, 1 graph not pairwise stable (``check``), 2 bad input
or IO failure, 3 invariant violation during a run.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .experiments import ExperimentConfig, ExperimentError, emit_outputs, load_config, run_experiment, with_overrides
from .game import DEFAULT_MAX_ITERATIONS, FormationRecord, pairwise_stable, run_formation
from .oracle import enumerate_trees_oracle
from .scenario import ScenarioError, generate_scenario, load_scenario, save_scenario
from .topology import TopologyError, read_edge_list, verify_constraints, write_edge_list

EXIT_OK = 0
EXIT_UNSTABLE = 1
EXIT_INPUT = 2
EXIT_INVARIANT = 3


def _scenario(args):
    if args.config:
        sc = load_scenario(args.config)
    else:
        J = args.uavs or 5
        sc = generate_scenario(args.seed or 0, J, args.sbs or 2 * J)
    if args.delta_mode:
        sc = sc.with_options(delta_mode=args.delta_mode)
    return sc


def _fmt(x: float) -> str:
    return f"{x:.6g}" if math.isfinite(x) else str(x)


def cmd_run(args) -> int:
    sc = _scenario(args)
    record = FormationRecord()
    g, positions, stats = run_formation(sc, args.max_iters or DEFAULT_MAX_ITERATIONS, record=record)
    report = verify_constraints(g)
    if stats.final_stable and not report.all_pass:
        print(f"error: converged graph violates constraints: {report}", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"J={sc.num_uavs} seed={sc.seed} iterations={stats.iterations_to_converge} "
          f"link_changes={stats.link_changes} stable={stats.final_stable}")
    print("edges:", " ".join(f"{c}-{p}" for c, p in g.edge_list()))
    for k, e in enumerate(stats.per_uav):
        print(f"  uav {k}: rate_dl={_fmt(e.rate_dl)} rate_ul={_fmt(e.rate_ul)} "
              f"delay_dl={_fmt(e.delay_dl)} delay_ul={_fmt(e.delay_ul)}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_scenario(sc, out / "scenario.yaml")
        write_edge_list(g, out / "final.edges")
        with (out / "events.jsonl").open("w", encoding="utf-8") as fh:
            for ev in record.events:
                fh.write(json.dumps(ev) + "\n")
        with (out / "trace.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "round", "uav", "x", "y", "z"])
            w.writerows(record.trace)
        with (out / "positions.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["uav", "x", "y", "z"])
            w.writerows([k, *map(float, p)] for k, p in enumerate(positions))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg = with_overrides(cfg, base_seed=args.seed, runs_per_point=args.runs, baseline=args.baseline,
                         max_iterations=args.max_iters, delta_mode=args.delta_mode,
                         uav_counts=tuple(args.uavs) if args.uavs else None, output_dir=args.out,
                         workers=args.workers)
    metrics = run_experiment(cfg)
    out = cfg.output_dir or "results"
    emit_outputs(metrics, out)
    for p in metrics.points:
        line = (f"J={p.num_uavs:>3} runs={p.runs} rate={p.mean_rate:.6g} bit/s delay={p.mean_delay:.6g} s "
                f"iterations min/mean/max={p.iterations_min}/{p.iterations_mean:.2f}/{p.iterations_max} "
                f"nonconverged={p.nonconverged}")
        if p.rate_gain is not None:
            line += f" rate_gain={100 * p.rate_gain:.1f}% delay_gain={100 * p.delay_gain:.1f}%"
        print(line)
    print(f"outputs written to {out}")
    return EXIT_OK


def _read_positions(path, num_uavs: int) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    pos = np.full((num_uavs, 3), np.nan)
    for lineno, row in enumerate(rows, 2):
        try:
            pos[int(row["uav"])] = float(row["x"]), float(row["y"]), float(row["z"])
        except (KeyError, ValueError, IndexError, TypeError) as e:
            raise ValueError(f"{path}:{lineno}: bad position row ({e})") from None
    if np.isnan(pos).any():
        raise ValueError(f"{path}: positions missing for some UAVs")
    return pos


def cmd_check(args) -> int:
    if not args.config:
        print("error: check needs --config <scenario.yaml>", file=sys.stderr)
        return EXIT_INPUT
    sc = _scenario(args)
    g = read_edge_list(args.graph)
    if g.num_uavs != sc.num_uavs:
        print(f"error: graph has {g.num_uavs} UAVs, scenario has {sc.num_uavs}", file=sys.stderr)
        return EXIT_INPUT
    report = verify_constraints(g)
    print(f"constraints: connected={report.connected} edges={report.edge_count} "
          f"acyclic={report.acyclic} binary={report.binary}")
    positions = _read_positions(args.positions, sc.num_uavs) if args.positions else sc.positions()
    result = pairwise_stable(g, positions, sc, sc.initial_positions())
    if result.stable:
        print("pairwise stable")
        return EXIT_OK
    dev = result.witness
    print(f"not pairwise stable: UAV {dev.actor} gains by {dev.kind} with node {dev.partner}")
    return EXIT_UNSTABLE


def cmd_oracle(args) -> int:
    sc = _scenario(args)
    res = enumerate_trees_oracle(sc, args.max_uavs)
    for e in res:
        edges = " ".join(f"{c}-{p}" for c, p in e.tree.edge_list())
        print(f"{'stable  ' if e.stable else '        '} total={_fmt(e.total_utility)}  {edges}")
    best = " ".join(f"{c}-{p}" for c, p in res.maximizer.tree.edge_list())
    print(f"{len(res)} trees, {len(res.stable_trees)} stable; sum-utility maximizer: {best}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario YAML (run/check/oracle) or sweep YAML (sweep)")
    common.add_argument("--seed", type=int, help="scenario seed, or base seed for sweep")
    common.add_argument("--max-iters", type=int, help=f"iteration cap per run (default {DEFAULT_MAX_ITERATIONS})")
    common.add_argument("--delta-mode", choices=("subtree", "one_hop"), help="relay load model")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="uavbackhaul", description="UAV backhaul network formation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run the formation game on one scenario")
    p.add_argument("--uavs", type=int, help="number of UAVs for a generated scenario")
    p.add_argument("--sbs", type=int, help="number of SBSs (default 2 per UAV)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="batch runs over UAV counts")
    p.add_argument("--uavs", type=int, nargs="+", help="UAV counts to sweep")
    p.add_argument("--runs", type=int, help="runs per UAV count")
    p.add_argument("--baseline", choices=("star", "none"))
    p.add_argument("--workers", type=int, help="worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", parents=[common], help="pairwise-stability check of a saved graph")
    p.add_argument("graph", help="edge-list file")
    p.add_argument("--positions", help="CSV of UAV positions (uav,x,y,z); default: scenario positions")
    p.set_defaults(func=cmd_check, uavs=None, sbs=None)

    p = sub.add_parser("oracle", parents=[common], help="enumerate all trees for a small scenario")
    p.add_argument("--uavs", type=int, help="number of UAVs for a generated scenario")
    p.add_argument("--sbs", type=int, help="number of SBSs (default 2 per UAV)")
    p.add_argument("--max-uavs", type=int, default=5, help="refuse larger scenarios")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.max_iters is not None and args.max_iters < 1:
        print("error: --max-iters must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except ExperimentError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ScenarioError, TopologyError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
