"""Command-line entry point: `proje {train,eval,predict,sweep}`."""

import argparse
import logging
import sys
from typing import List, Optional

from . import config as settings
from .commands import evaluate, predict, sweep, train
from .commands.common import EXIT_USAGE

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proje",
        description="Train and evaluate ProjE knowledge-graph completion models.",
    )
    subparsers = parser.add_subparsers(dest="command")
    for command in (train, evaluate, predict, sweep):
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=settings.LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
