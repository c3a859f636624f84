#!/usr/bin/env python3
"""
Command-line entry point for the grnformer pipeline.

Usage:
    grnformer synth     --config run.json --seed 7 --out-dir runs/demo
    grnformer build-grn --out-dir runs/demo
    grnformer activity  --out-dir runs/demo
    grnformer pretrain  --out-dir runs/demo [--resume runs/demo/checkpoint.npz]
    grnformer analyze   --out-dir runs/demo
    grnformer eval      --out-dir runs/demo

Exit codes: 0 on success, 1 on usage errors, 2 on data or config errors.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from grnformer.config import load_run_config
from grnformer.errors import EXIT_OK, UsageError, cli_error_wrapper
from grnformer.pipeline import STAGES
from grnformer.stage_logging import get_stage_logger

logger = logging.getLogger(__name__)

RUN_LOG = "run_log.json"

DESCRIPTIONS = {
    "synth": "Generate the synthetic multiome dataset and its manifest",
    "build-grn": "Link eRegulons per cell type and write cell-type GRNs",
    "activity": "Score regulon activity, fit thresholds and derive cell GRNs",
    "pretrain": "Structure-aware masked-expression pretraining",
    "analyze": "Fusion attention importance and TF enrichment",
    "eval": "Perturbation fine-tune and held-out metrics",
}


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on bad arguments."""

    def error(self, message: str) -> None:
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grnformer", description="Multi-scale GRN enhanced expression modeling")
    subparsers = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, description in DESCRIPTIONS.items():
        sub = subparsers.add_parser(name, help=description, description=description)
        sub.add_argument("--config", default=None, help="Run config JSON (defaults when omitted)")
        sub.add_argument("--seed", type=int, default=None, help="Global seed (overrides GRNFORMER_SEED and config)")
        sub.add_argument("--out-dir", default=None, help="Directory for inputs and outputs of the run")
        sub.add_argument("--workers", type=int, default=None, help="Worker threads; 1 is bit-reproducible")
        sub.add_argument(
            "--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"],
            help="Logging verbosity (default from config)",
        )
        if name == "pretrain":
            sub.add_argument("--resume", default=None, help="Checkpoint to continue from")
    return parser


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


@cli_error_wrapper
def cli(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the exit code."""
    args = build_parser().parse_args(list(argv) if argv is not None else None)
    if args.command is None:
        raise UsageError(f"a subcommand is required: {' | '.join(STAGES)}")
    if args.workers is not None and args.workers < 1:
        raise UsageError("--workers must be at least 1")

    run = load_run_config(args.config, seed=args.seed, out_dir=args.out_dir, workers=args.workers)
    _configure_logging(args.log_level or run.log_level)
    stage = STAGES[args.command]
    stage_logger = get_stage_logger()
    stage_logger.clear()
    try:
        if args.command == "pretrain":
            result = stage(run, resume=args.resume)
        else:
            result = stage(run)
    finally:
        stage_logger.dump(Path(run.out_dir) / RUN_LOG)
    logger.info("%s: %s", args.command, result)
    print(f"{args.command}: {result}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(cli(argv))


if __name__ == "__main__":
    main()
