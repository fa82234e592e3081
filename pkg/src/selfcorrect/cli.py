"""Command-line front-end: ``selfcorrect <command> [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .exceptions import InvalidArgumentError, MissingThresholdsError, SchemaError
from .experiments import COMMANDS, ExperimentConfig, load_config_file, run

HELP = {
    "calibrate": "Monte Carlo thresholds b, c, e (and closed-form a) from Wiener paths",
    "power-finite": "empirical power of the tests for simulated self-correcting paths at finite T",
    "power-limit": "limit power curves of the score, LR, Wald and Neyman-Pearson tests",
    "compare": "per-u power gaps between tests, flagging 3-sigma ordering violations",
    "tables": "published threshold tables next to the reproduced values",
}


def _add_flags(p: argparse.ArgumentParser) -> None:
    # defaults are None so that a config file can fill in whatever is not given
    p.add_argument("--config", help="flat key = value file (a run manifest also works); flags override it")
    p.add_argument("--rate", type=float, help="Poisson rate S* under the null")
    p.add_argument("--horizon", type=float, help="observation window T")
    p.add_argument("--psi", help="'exp' or a psi spec file (expr = ..., deriv_at_zero = ...)")
    p.add_argument("--eps", help="comma-separated significance levels")
    p.add_argument("--u-grid", dest="u_grid", help="start:stop:step or comma list")
    p.add_argument("--trials", type=int, help="Monte Carlo sample size M")
    p.add_argument("--steps", type=int, help="grid steps per Wiener/OU path")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int, help="worker threads (results do not depend on it)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--quick", action="store_const", const=True, help="M = 10^4 unless --trials is given")
    p.add_argument("--tests", help="subset of score,lr,wald for power-finite")
    p.add_argument("--thresholds", help="threshold CSV written by calibrate")
    p.add_argument("--alt-upper", dest="alt_upper", type=float, help="upper end of the alternative set in u")
    p.add_argument("--inputs", help="comma-separated CSVs for compare")
    p.add_argument("--cache", help="directory for reusable Wiener ensembles")
    p.add_argument("--no-plot", dest="plot", action="store_const", const=False, help="skip SVG output")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selfcorrect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_flags(sub.add_parser(name, help=HELP[name], description=HELP[name]))
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = load_config_file(args.config) if args.config else {}
    values.pop("command", None)
    for key, value in vars(args).items():
        if key in ("config", "verbose", "command") or value is None:
            continue
        values[key] = value
    return ExperimentConfig(command=args.command, **values)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = run(config_from_args(args))
    except (InvalidArgumentError, MissingThresholdsError, SchemaError) as exc:
        print(f"selfcorrect {args.command}: error: {exc}", file=sys.stderr)
        return 2
    for path in result.outputs:
        print(path)
    print(result.manifest)
    if "violations" in result.details:
        print(f"ordering violations: {result.details['violations']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
