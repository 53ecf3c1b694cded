"""Command-line entry point: ``e2e-auction <command> ...``.

Every command accepts ``--seed``; commands working on an instance take either
``--instance FILE`` or ``--config FILE`` (instance generated with the seed).
Exit status is 1 whenever an audited invariant fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (GAIN_TOL, Agent, deviation_probe, designated_buyer, payoff_surface,
                      run_band_sweep)
from .mechanisms import MECHANISMS, outcome_violations
from .netmodel import ScenarioConfig, generate_instance
from .netopt import check_feasibility, plan_throughput, solve_p1_exact, solve_p1_greedy
from .serialize import (dumps, instance_to_dict, load_config, load_instance, outcome_to_dict,
                        plan_from_dict, plan_to_dict, read_json, report_to_dict)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args) -> ScenarioConfig:
    config = load_config(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _instance(args):
    if getattr(args, "instance", None):
        return load_instance(args.instance)
    return generate_instance(_config(args))


def parse_bands(text: str):
    """``1..6`` or ``1,2,4``."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",") if x]


def cmd_gen(args) -> int:
    _emit(dumps(instance_to_dict(generate_instance(_config(args)))), args.out)
    return 0


def cmd_solve(args) -> int:
    inst = _instance(args)
    plan = solve_p1_exact(inst) if args.method == "exact" else solve_p1_greedy(inst)
    _emit(dumps(plan_to_dict(plan)), args.out)
    report = check_feasibility(inst, plan)
    print(f"throughput_mbps={plan_throughput(plan, inst)!r} feasible={report.passed}",
          file=sys.stderr)
    return 0 if report.passed else 1


def cmd_check(args) -> int:
    inst = _instance(args)
    report = check_feasibility(inst, plan_from_dict(read_json(args.plan)))
    sys.stdout.write(dumps(report_to_dict(report)))
    return 0 if report.passed else 1


def cmd_auction(args) -> int:
    inst = _instance(args)
    outcome = MECHANISMS[args.mechanism](inst)
    _emit(dumps(outcome_to_dict(outcome)), args.out)
    problems = outcome_violations(inst, outcome)
    for p in problems:
        print(p, file=sys.stderr)
    return 1 if problems else 0


def cmd_sweep(args) -> int:
    result = run_band_sweep(_config(args), parse_bands(args.bands), args.trials)
    _emit(result.means_csv() if args.means else result.to_csv(), args.out)
    ok = all(row[3] <= row[2] + 1e-9 for row in result.rows)
    return 0 if ok else 1


def cmd_surface(args) -> int:
    inst = _instance(args)
    buyer = args.buyer if args.buyer is not None else designated_buyer(inst)
    surface = payoff_surface(inst, buyer, points=args.grid, mechanism=args.mechanism)
    _emit(surface.to_csv(), args.out)
    ok = surface.truthful_utility >= surface.max_utility - GAIN_TOL
    print(f"buyer={buyer} truthful_utility={surface.truthful_utility!r} "
          f"max_utility={surface.max_utility!r}", file=sys.stderr)
    return 0 if ok else 1


def cmd_probe(args) -> int:
    inst = _instance(args)
    grid = [float(x) for x in args.grid.split(",")] if args.grid else None
    report = deviation_probe(inst, Agent.parse(args.agent), grid, args.mechanism)
    _emit(dumps(report.to_dict()), args.out)
    return 0 if report.max_gain <= GAIN_TOL else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="e2e-auction", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, source=True, help=None):
        p = sub.add_parser(name, help=help)
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--config", help="scenario config JSON (default: built-in scenario)")
        if source:
            p.add_argument("--instance", help="instance JSON; takes precedence over --config")
        p.add_argument("--out", help="output file (default: stdout)")
        p.set_defaults(func=func)
        return p

    command("gen", cmd_gen, source=False, help="generate an instance")
    p = command("solve", cmd_solve, help="solve P1")
    p.add_argument("--method", choices=("greedy", "exact"), default="greedy")
    p = command("check", cmd_check, help="audit a plan")
    p.add_argument("--plan", required=True)
    p = command("auction", cmd_auction, help="clear an auction")
    p.add_argument("--mechanism", choices=sorted(MECHANISMS), default="double")
    p = command("sweep", cmd_sweep, source=False, help="throughput vs. number of bands")
    p.add_argument("--bands", default="1..6")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--means", action="store_true", help="emit per-band means instead of rows")
    p = command("surface", cmd_surface, help="payoff surface of one buyer's two bids")
    p.add_argument("--buyer", type=int, default=None)
    p.add_argument("--grid", type=int, default=41, help="points per axis")
    p.add_argument("--mechanism", choices=sorted(MECHANISMS), default="double")
    p = command("probe", cmd_probe, help="unilateral deviation probe")
    p.add_argument("--agent", required=True, help="buyer:I:K or seller:J:I:K")
    p.add_argument("--mechanism", choices=sorted(MECHANISMS), default="double")
    p.add_argument("--grid", help="comma-separated reports (default: 21 points on [0, 2v])")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
