"""
densecode command line
======================

    densecode capacity  --channel quasi-classical --p 0.05 --mu 0 --state bell --encoding preprocessed
    densecode sweep     --out fig1.csv --axis1 p:0:1:101 --axis2 mu:0:1:101 --fix eta=1
    densecode crossover --p-start 0.01 --p-stop 0.99 --steps 99
    densecode verify    --grid-density 5 --seed 0

Exit codes: 0 ok, 1 verification failure, 2 usage, 3 optimizer did not
converge, 4 output could not be written.
"""

import argparse
import json
import logging
import sys

import numpy as np

from channels import channel_from_json
from optimize import OptimizerConfig, crossover_curve
from qmat import DensecodeError
from sweep_engine import (
    CHANNEL_CHOICES,
    ENCODING_CHOICES,
    STATE_CHOICES,
    CapacityQuery,
    SweepEngine,
    evaluate_capacity,
    sweep_spec_from_flags,
)
from system_validator import print_report, run_verification

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_IO = 4


def _capacity_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--channel", choices=CHANNEL_CHOICES, default="quasi-classical")
    parent.add_argument("--channel-json", metavar="PATH", help="correlated channel spec as JSON, overrides --channel/--p/--mu")
    parent.add_argument("--d", type=int, default=2)
    parent.add_argument("--p", type=float, default=0.0)
    parent.add_argument("--mu", type=float, default=0.0)
    parent.add_argument("--state", choices=STATE_CHOICES, default="werner")
    parent.add_argument("--eta", type=float, default=1.0)
    parent.add_argument("--encoding", choices=ENCODING_CHOICES, default="unitary")
    parent.add_argument("--config", metavar="PATH", help="optimizer config JSON (restarts, max_iters, ftol, seed)")
    parent.add_argument("--seed", type=int)
    parent.add_argument("--restarts", type=int)
    parent.add_argument("--max-iters", type=int)
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="densecode",
        description="Super dense coding capacity over correlated Pauli channels",
    )
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)
    capacity_flags = _capacity_flags()

    sub.add_parser("capacity", parents=[capacity_flags], help="capacity at one parameter point")

    sweep = sub.add_parser("sweep", parents=[capacity_flags], help="capacity over a parameter grid")
    sweep.add_argument("--out", required=True, metavar="PATH")
    sweep.add_argument("--format", choices=["csv", "json"], default="csv")
    sweep.add_argument("--axis1", required=True, metavar="NAME:START:STOP:STEPS")
    sweep.add_argument("--axis2", metavar="NAME:START:STOP:STEPS")
    sweep.add_argument("--fix", action="append", default=[], metavar="NAME=VALUE")

    crossover = sub.add_parser("crossover", help="crossover curve mu~(p)")
    crossover.add_argument("--p-start", type=float, required=True)
    crossover.add_argument("--p-stop", type=float, required=True)
    crossover.add_argument("--steps", type=int, required=True)
    crossover.add_argument("--tol", type=float, default=1e-4)
    crossover.add_argument("--out", metavar="PATH", help="write the JSON here instead of stdout")

    verify = sub.add_parser("verify", help="run the identity suites")
    verify.add_argument("--grid-density", type=int, default=5)
    verify.add_argument("--seed", type=int, default=0)
    # negative control for the suite itself
    verify.add_argument("--corrupt-channel", action="store_true", help=argparse.SUPPRESS)
    return parser


def _optimizer_config(args) -> OptimizerConfig:
    settings = OptimizerConfig().to_dict()
    if args.config:
        settings.update(OptimizerConfig.from_json_file(args.config).to_dict())
    for flag, name in (("seed", "seed"), ("restarts", "restarts"), ("max_iters", "max_iters")):
        value = getattr(args, flag)
        if value is not None:
            settings[name] = value
    return OptimizerConfig.from_dict(settings)


def query_from_args(args) -> CapacityQuery:
    channel_spec = None
    if args.channel_json:
        with open(args.channel_json, encoding="utf-8") as fh:
            channel_spec = channel_from_json(json.load(fh))
    return CapacityQuery(
        channel=args.channel,
        d=channel_spec.d if channel_spec is not None else args.d,
        p=args.p,
        mu=args.mu,
        state=args.state,
        eta=args.eta,
        encoding=args.encoding,
        optimizer=_optimizer_config(args),
        channel_spec=channel_spec,
    )


def cmd_capacity(args) -> int:
    result = evaluate_capacity(query_from_args(args))
    print(json.dumps(result))
    if result.get("converged") is False:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = query_from_args(args)
    spec = sweep_spec_from_flags(args.axis1, args.axis2, args.fix, base)
    engine = SweepEngine(base)
    table = engine.run(spec)
    try:
        engine.write(table, args.out, args.format)
    except OSError as e:
        logger.error(f"❌ cannot write {args.out}: {e}")
        return EXIT_IO
    logger.info(f"✅ wrote {len(table)} rows to {args.out}")
    return EXIT_OK


def cmd_crossover(args) -> int:
    if args.steps < 2 or not args.p_start < args.p_stop:
        raise DensecodeError("crossover needs --steps >= 2 and --p-start < --p-stop")
    p_values = np.linspace(args.p_start, args.p_stop, args.steps)
    rows = [r.as_dict() for r in crossover_curve(p_values, args.tol)]
    text = json.dumps(rows, indent=2) + "\n"
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as e:
            logger.error(f"❌ cannot write {args.out}: {e}")
            return EXIT_IO
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    report = run_verification(args.grid_density, args.seed, corrupt_channel=args.corrupt_channel)
    print_report(report)
    return EXIT_OK if report.all_passed else EXIT_VERIFY_FAILED


COMMANDS = {
    "capacity": cmd_capacity,
    "sweep": cmd_sweep,
    "crossover": cmd_crossover,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (DensecodeError, OSError, json.JSONDecodeError) as e:
        print(f"densecode: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
