"""Command-line front end: ``circle-renorm <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import (
    BudgetExceededError,
    CircleRenormError,
    CombinatoricsMismatchError,
    ConfigError,
    PrecisionError,
)
from .pipeline import CONJUGACY_AUDITS, STAGES, RunConfig, demo_config, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_MISMATCH = 4
EXIT_OTHER = 1

_EXIT_BY_ERROR = {
    "ConfigError": EXIT_CONFIG,
    "BudgetExceededError": EXIT_BUDGET,
    "PrecisionError": EXIT_BUDGET,
    "CombinatoricsMismatchError": EXIT_MISMATCH,
}


def _json_arg(text: str) -> dict:
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {text!r}") from exc
    if not isinstance(value, dict):
        raise ConfigError("map spec must be a JSON object")
    return value


def _cf_arg(text: str) -> list:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise ConfigError(f"continued fraction must be comma-separated integers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser, out_default: str = "report"):
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--precision", type=int, help="working precision in bits")
    p.add_argument("--budget", type=int, help="cap on map evaluations")
    p.add_argument("--jobs", type=int, default=1, help="worker cap for independent audits")
    p.add_argument("-v", "--verbose", action="store_true")


def _map_args(p: argparse.ArgumentParser, depth_default: int = 10):
    p.add_argument("--map", dest="f", default='{"family": "arnold2"}',
                   help='map spec JSON, e.g. \'{"family": "arnold2"}\'; without "a" the map is tuned to --cf')
    p.add_argument("--cf", default="1,1,1,1,1,1,1,1,1,1,1,1", help="target partial quotients")
    p.add_argument("--depth", type=int, default=depth_default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="circle-renorm",
                                     description="Renormalization diagnostics for bi-critical circle maps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tune", help="tune a family parameter to a rotation prefix")
    _map_args(p)
    _common(p)

    for name, text in (("partition", "modified partitions and their checks"),
                       ("renorm", "commuting pairs, chi and the renormalization oracle"),
                       ("tubular", "tubular sets and charts at levels with a large quotient")):
        p = sub.add_parser(name, help=text)
        _map_args(p)
        _common(p)

    p = sub.add_parser("conjugacy", help="conjugacy between two maps and the decay audits")
    p.add_argument("--f", default='{"family": "arnold2"}', help="first map spec JSON")
    p.add_argument("--g", default='{"family": "perturbed2", "coeffs": ["0.01"]}', help="second map spec JSON")
    p.add_argument("--cf", default="1,1,1,1,1,1,1,1,1,1,1,1")
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--audits", default="all", help=f"comma list from {', '.join(CONJUGACY_AUDITS)} or 'all'")
    p.add_argument("--svg", action="store_true", help="write decay plots as SVG")
    _common(p)

    p = sub.add_parser("run", help="full pipeline from a JSON config")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a JSON run config")
    src.add_argument("--demo", action="store_true", help="use the shipped golden-mean demo config")
    _common(p, out_default=None)
    return parser


def _config(args) -> tuple:
    over = {"precision": args.precision, "budget": args.budget, "jobs": args.jobs}
    if args.command == "run":
        out = args.out or "report"
        if args.demo:
            return demo_config(out, **over), STAGES
        return RunConfig.from_file(args.config, out=out, **over), STAGES
    cf = _cf_arg(args.cf)
    if args.command == "conjugacy":
        audits = list(CONJUGACY_AUDITS) if args.audits == "all" else [a for a in args.audits.split(",") if a]
        cfg = RunConfig(f=_json_arg(args.f), g=_json_arg(args.g), cf=cf, depth=args.depth, out=args.out,
                        audits=audits, svg=args.svg, **over)
        return cfg, ("tune", "conjugacy")
    audits = {"tune": [], "partition": ["partitions"], "renorm": ["renorm"], "tubular": ["tubular"]}[args.command]
    stage = {"tune": "tune", "partition": "partitions", "renorm": "renorm", "tubular": "tubular"}[args.command]
    cfg = RunConfig(f=_json_arg(args.f), cf=cf, depth=args.depth, out=args.out, audits=audits, **over)
    return cfg, ("tune",) if stage == "tune" else ("tune", stage)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, stages = _config(args)
        manifest = run(cfg, stages)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetExceededError, PrecisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except CombinatoricsMismatchError as exc:
        print(f"combinatorics mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except CircleRenormError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    if manifest.error:
        err = manifest.error
        print(f"stage {err['stage']} failed: {err['type']}: {err['message']}", file=sys.stderr)
        return _EXIT_BY_ERROR.get(err["type"], EXIT_OTHER)
    print(f"wrote {len(manifest.files)} files to {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
