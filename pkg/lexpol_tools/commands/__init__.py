"""The ``lexpol`` command line: one subcommand per CommandBase subclass."""

import argparse
import logging
import sys
from typing import Optional, Sequence

from ..utils.errors import exit_code_for, leaf_exceptions
from .command_base import CommandBase, commands
from .compare import CompareCommand
from .dominance_map import DominanceMapCommand
from .evaluate import EvaluateCommand
from .gradcheck import GradcheckCommand
from .train import TrainCommand

logger = logging.getLogger("lexpol_tools")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lexpol", description="Multi-task SAC with lexical policy composition.")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="verbosity of the log written to stderr",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, cls in commands().items():
        cls.add_args(sub.add_parser(name, help=cls.DESCRIPTION, description=cls.DESCRIPTION))
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return commands()[args.command](args).run()
    except Exception as e:
        for leaf in leaf_exceptions(e):
            notes = "".join(f" ({n})" for n in getattr(leaf, "__notes__", ()))
            logger.error("%s: %s%s", type(leaf).__name__, leaf, notes)
        code = exit_code_for(e)
        if code == 1:
            logger.debug("traceback", exc_info=e)
        return code
