"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

from ..errors import ConfigError, SurfnetError
from .config import load_config
from . import runners

_EXPERIMENTS = {
    "train-flow": ("train_flow", runners.run_train_flow),
    "surf": ("surf", runners.run_surf),
    "landscape": ("landscape", runners.run_landscape),
    "track": ("tracking", runners.run_tracking),
    "recover": ("recovery", runners.run_recovery),
    "cs": ("compressed_sensing", runners.run_compressed_sensing),
    "rate-distortion": ("rate_distortion", runners.run_rate_distortion),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surfnet",
        description="Generator-network inversion by surfing evolving objectives.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory")
    rep = sub.add_parser("report", help="summarize a results directory")
    rep.add_argument("--out", required=True, help="results directory to summarize")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            runners.run_report(args.out)
            return 0
        kind, runner = _EXPERIMENTS[args.command]
        cfg = load_config(args.config, kind=kind)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        summary = runner(cfg)
        print(json.dumps(summary, indent=2, sort_keys=True, default=str))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (SurfnetError, OSError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
