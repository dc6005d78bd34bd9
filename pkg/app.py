#!/usr/bin/env python3
"""
Command-line entry point.

Every subcommand builds a RunConfig, runs its checks inside a ReportCollector
and prints the records as JSON. Exit codes: 0 all checks passed, 1 a
tolerance was exceeded, 2 usage, configuration or domain error.

Usage:
    python app.py verify-structure --family canonical_CP2 --grid-points 50
    python app.py dhym plot --c 0,1,8 --H-max 5 --output figure1.csv
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from commands import deformed, instanton, leaves, spectra, structure
from models import FAMILIES, ConfigError, GeometryError, ReportCollector, RunConfig
from utils import DEFAULT_GRID_POINTS, DEFAULT_SEED, load_tolerances, render_report, setup_logging

logger = logging.getLogger(__name__)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

Handler = Callable[[RunConfig, ReportCollector], bool]

COMMANDS: Dict[str, Handler] = {
    "verify-structure": structure.verify_structure,
    "einstein-check": structure.einstein_check,
    "deformation-check": structure.deformation_check,
    "spectrum": spectra.spectrum,
    "solve-kappa": spectra.solve,
    "verify-instanton": instanton.verify_instanton,
    "ym-energy": instanton.ym_energy,
    "killing-check": instanton.killing_check,
    "levi-civita-check": instanton.levi_civita_check,
    "dhym solve": deformed.solve,
    "dhym verify": deformed.verify,
    "dhym plot": deformed.plot,
    "dhym count-branches": deformed.count_branches,
    "slag verify": leaves.verify,
    "slag metric": leaves.metric,
}

# argparse destinations that are not per-command options
_RUN_FIELDS = {"command", "action", "seed", "grid_points", "output", "config", "tolerances", "verbose"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so main() owns the exit code."""

    def error(self, message):
        raise UsageError(message)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Sampling seed")
    parser.add_argument("--grid-points", type=int, default=DEFAULT_GRID_POINTS, help="Sample points per check")
    parser.add_argument("--tolerance", type=float, help="Override every check tolerance")
    parser.add_argument("--tolerances", help="JSON file of per-check tolerances")
    parser.add_argument("--config", help="JSON RunConfig; command-line flags are ignored when given")
    parser.add_argument("--output", help="Write results to this .json or .csv file")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--family", choices=FAMILIES, help="Background family")
    parser.add_argument("--cone-param", type=float, help="Resolution parameter C of the canonical bundles")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="calabi-lab", description="Residual checks for S¹-invariant Kähler–Einstein geometry")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    for name in ("verify-structure", "einstein-check", "killing-check", "levi-civita-check"):
        _common(sub.add_parser(name))

    p = sub.add_parser("deformation-check")
    _common(p)
    p.add_argument("--mu", type=float, choices=[1.0, -1.0], default=1.0)

    p = sub.add_parser("spectrum")
    _common(p)
    p.add_argument("--manifold", choices=["CP2", "S2xS2", "T4", "R4"], default="CP2")
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--k-min", type=int, default=0)
    p.add_argument("--polynomial-only", action="store_true")
    p.add_argument("--check-eigenfunctions", action="store_true")

    for name in ("solve-kappa", "verify-instanton", "ym-energy"):
        p = sub.add_parser(name)
        _common(p)
        p.add_argument("--k", type=int)
        p.add_argument("--mu", type=float)
        p.add_argument("--c1", type=float, default=1.0)
        p.add_argument("--c2", type=float, default=0.0)
        p.add_argument("--eigenfunction", type=int, default=0)
        if name == "solve-kappa":
            p.add_argument("--polynomial", action="store_true", help="Terminating branch for --k")
            p.add_argument("--require-global", action="store_true")
        if name == "ym-energy":
            p.add_argument("--r-max", type=float, default=10.0)
            p.add_argument("--connection", help="Elementary connection name instead of an instanton")

    dhym = sub.add_parser("dhym")
    actions = dhym.add_subparsers(dest="action", parser_class=_Parser)
    actions.required = True
    for action in ("solve", "verify", "plot", "count-branches"):
        p = actions.add_parser(action)
        _common(p)
        p.add_argument("--c", help="Comma-separated constants c")
        p.add_argument("--H-max", dest="H_max", type=float)
        p.add_argument("--H-min", dest="H_min", type=float)
        p.add_argument("--branch", choices=["upper", "middle", "lower"])

    slag = sub.add_parser("slag")
    actions = slag.add_subparsers(dest="action", parser_class=_Parser)
    actions.required = True
    for action in ("verify", "metric"):
        p = actions.add_parser(action)
        _common(p)
        p.add_argument("--y", type=float)
        p.add_argument("--leaf-family", type=int, choices=[1, 2])
        p.add_argument("--theta-diff", type=float)
        p.add_argument("--coords", choices=["t", "s"])
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """RunConfig from parsed flags, or from --config when given."""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Could not read {args.config}: {e}") from e
        config = RunConfig.from_json(text)
        config.tolerances = {**load_tolerances(args.tolerances), **config.tolerances}
        if args.output:
            config.output = args.output
        return config

    command = args.command if getattr(args, "action", None) is None else f"{args.command} {args.action}"
    options = {key: value for key, value in vars(args).items() if key not in _RUN_FIELDS and value is not None}
    return RunConfig(command=command, grid_points=args.grid_points, seed=args.seed,
                     tolerances=load_tolerances(args.tolerances), output=args.output, options=options)


def dispatch(config: RunConfig) -> int:
    """Run one configured command; returns the process exit code."""
    handler = COMMANDS.get(config.command)
    if handler is None:
        logger.error(f"Unknown command: {config.command}")
        return EXIT_USAGE
    if config.grid_points < 1:
        logger.error("--grid-points must be positive")
        return EXIT_USAGE
    try:
        with ReportCollector(config.output) as collector:
            passed = handler(config, collector)
    except (GeometryError, ConfigError) as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"❌ Could not write {config.output}: {e}")
        return EXIT_USAGE

    print(render_report(collector.records))
    passed = passed and collector.all_passed()
    logger.info(f"{'✅' if passed else '⚠️'} {config.command}: {len(collector.records)} records")
    return EXIT_PASS if passed else EXIT_FAIL


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    setup_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        config = config_from_args(args)
    except ConfigError as e:
        logger.error(f"❌ {e}")
        return EXIT_USAGE
    return dispatch(config)


if __name__ == "__main__":
    raise SystemExit(main())
