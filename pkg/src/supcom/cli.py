"""Command-line surface: one subcommand per pipeline stage.

Exit codes: 0 success, 1 fatal error, 2 partial generation failure above the
configured failure-rate ceiling.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import apply_overrides, load_config
from .errors import SupcomError
from .stages import generation_failure_exceeds_ceiling, run_stage

log = logging.getLogger("supcom")

COMMANDS = ["mine", "ingest-issues", "link", "dataset", "generate", "evaluate", "report"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supcom",
        description=(
            "Mine method-comment-issue triples from a git repository and generate "
            "issue-verified supplementary code comments."
        ),
    )
    parser.add_argument("--version", action="version", version="%(prog)s 0.1.0")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", required=True, help="path to the pipeline config JSON")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument(
            "--offline",
            action="store_true",
            help="force offline embedding/side providers; requires a mock chat provider",
        )
        resume = p.add_mutually_exclusive_group()
        resume.add_argument(
            "--resume",
            dest="resume",
            action="store_true",
            default=True,
            help="skip stages whose inputs and outputs are unchanged (default)",
        )
        resume.add_argument(
            "--no-resume", dest="resume", action="store_false", help="always re-run the stage"
        )
        p.add_argument(
            "--concurrency", type=int, default=None, help="override generation concurrency"
        )
        p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(
            cfg, out_dir=args.out, offline=args.offline, concurrency=args.concurrency
        )
        ran, counters = run_stage(cfg, args.command, resume=args.resume)
    except SupcomError as exc:
        log.error("%s", exc)
        return 1
    if not ran:
        log.info("%s: outputs up to date", args.command)
    for key in sorted(counters):
        log.info("%s: %s = %s", args.command, key, counters[key])
    if args.command == "generate" and generation_failure_exceeds_ceiling(cfg, counters):
        log.error(
            "generate: %d of %d methods failed (ceiling %.2f)",
            counters.get("methods_failed", 0),
            counters.get("methods_in_generation", 0),
            cfg.generation.failure_rate_ceiling,
        )
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
