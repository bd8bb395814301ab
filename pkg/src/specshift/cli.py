"""Command-line entry point: ``specshift SUITE [flags]``."""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigInvalid
from .harness import SUITES, parse_config, run_suite


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specshift",
        description="Verification and measurement suites for standard and "
                    "reward-shifted speculative sampling on tabular models.",
    )
    sub = parser.add_subparsers(dest="suite", required=True)
    for suite in SUITES:
        p = sub.add_parser(suite, help=f"run the {suite} suite")
        p.add_argument("--config", default=None, metavar="PATH",
                       help="flat key = value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--vocab", type=int, default=None, metavar="N",
                       help="vocabulary size (0 = suite default)")
        p.add_argument("--depth", type=int, default=None, metavar="N")
        p.add_argument("--lookahead", type=int, default=None, metavar="N")
        p.add_argument("--gamma", type=float, default=None, metavar="F")
        p.add_argument("--beta", type=float, default=None, metavar="F")
        p.add_argument("--reward-scale", type=float, default=None,
                       metavar="F", dest="reward_scale")
        p.add_argument("--runs", type=int, default=None, metavar="N")
        p.add_argument("--instances", type=int, default=None, metavar="N")
        p.add_argument("--format", choices=("csv", "jsonl"), default=None)
        p.add_argument("--out", default=None, metavar="PATH")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        key: getattr(args, key)
        for key in ("seed", "vocab", "depth", "lookahead", "gamma", "beta",
                    "reward_scale", "runs", "instances", "format", "out")
        if getattr(args, key) is not None
    }
    overrides["suite"] = args.suite
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    report = run_suite(cfg)
    lines = (report.to_csv_lines() if cfg.format == "csv"
             else report.to_jsonl_lines())
    text = "\n".join(lines) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
        print(f"report written to {cfg.out}")
    else:
        sys.stdout.write(text)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
