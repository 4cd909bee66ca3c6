"""``augment <subcommand> --config <path> [--seed N] [--jobs N]``.

Exit codes: 0 success, 1 validation error, 2 partial failure with survivors.
Errors are printed to stderr as one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Optional, Sequence

from ..errors import AugmentError, ValidationError
from .config import load_config
from .stages import COMMANDS, STAGES, StageResult

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="augment", description="RGB-D novel-view augmentation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["run"]:
        p = sub.add_parser(name, help="all pipeline stages in order" if name == "run" else f"{name} stage")
        p.add_argument("--config", required=True, help="YAML or JSON pipeline config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="sub-scene worker threads")
    return parser


def _error_record(command: str, exc: Exception) -> dict:
    rec = {"command": command, "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ValidationError):
        rec["offenders"] = list(exc.offenders)
    return rec


def _summary(result: StageResult) -> dict:
    return {"stage": result.stage, "status": result.report["status"], "counts": result.report.get("counts", {}),
            "report": str(result.out_dir / "report.json")}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print(json.dumps({"command": args.command, "error": "ValidationError", "message": "--jobs must be >= 1"}),
              file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        stages = STAGES if args.command == "run" else (args.command,)
        partial = False
        for stage in stages:
            result = COMMANDS[stage](cfg, args.jobs)
            print(json.dumps(_summary(result), sort_keys=True))
            for err in result.report["errors"]:
                print(json.dumps(err, sort_keys=True), file=sys.stderr)
            partial |= result.partial
    except (AugmentError, ValueError, OSError) as e:
        print(json.dumps(_error_record(args.command, e), sort_keys=True), file=sys.stderr)
        return EXIT_INVALID
    return EXIT_PARTIAL if partial else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
