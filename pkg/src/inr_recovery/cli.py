"""Command line entry point: ``python -m inr_recovery <command> [options]``."""

import argparse
import logging
import sys

from .experiments import COMMANDS, ConfigError, run_command

DESCRIPTIONS = {
    "exact-recovery": "success-probability table of teacher recovery over (K, W)",
    "phantom": "reconstruct dot and disc phantoms, with zero-fill baseline and lambda search",
    "certify": "build and verify a dual certificate for a random width-1 teacher",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="inr_recovery", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=DESCRIPTIONS[name], description=DESCRIPTIONS[name])
        p.add_argument("--config", metavar="PATH", help="INI file with a [%s] section, or a manifest to replay" % name)
        p.add_argument("--out", metavar="DIR", default=f"out-{name}", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed (default: manifest seed or 0)")
        p.add_argument("--workers", type=int, default=1, help="trials run concurrently in this many processes")
        p.add_argument("--profile", choices=["desk", "paper"], default=None, help="default parameter set")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        run_command(args.command, args.out, args.config, args.profile, args.seed, args.workers)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{args.command}: outputs written to {args.out}")
    return 0
