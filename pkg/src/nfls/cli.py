"""Command-line entry point.

Each subcommand reads a JSON scenario (--config), writes a self-describing
artifact directory (--out) and exits 0 on success. Failures print a
machine-readable JSON object on stderr and exit nonzero.
"""

import argparse
import json
import sys
from pathlib import Path

from .runner import COMMANDS, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nfls",
        description="Near-field array localization and sensing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", required=True, type=Path,
                       help="scenario JSON file")
        p.add_argument("--out", required=True, type=Path,
                       help="output artifact directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(json.dumps({"error": "config-io", "message": str(exc)}), file=sys.stderr)
        return 1
    try:
        metrics = run(args.command, text, args.out, seed=args.seed)
    except Exception as exc:  # noqa: BLE001 - boundary: report every failure as JSON
        payload = {"error": type(exc).__name__, "message": str(exc),
                   "command": args.command}
        field = getattr(exc, "field", None)
        if field:
            payload["field"] = field
        print(json.dumps(payload), file=sys.stderr)
        return 1
    summary = {k: v for k, v in metrics.items()
               if not isinstance(v, (list, dict)) or k == "pairs"}
    print(json.dumps(summary, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
