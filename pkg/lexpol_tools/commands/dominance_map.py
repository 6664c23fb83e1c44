from .command_base import CommandBase, add_suite_args, suite_from_args
from .imports import *


class DominanceMapCommand(CommandBase):
    NAME = "map"
    DESCRIPTION = "Write the gate's preferred sub-policy over a grid of the T-maze."

    @staticmethod
    def add_args(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("checkpoint", help="checkpoint directory")
        add_suite_args(parser)
        parser.add_argument("--res", type=int, default=40, help="grid cells per side")
        parser.add_argument("--phase", choices=("seek_red", "seek_blue", "static"), default="seek_red")
        parser.add_argument("--out", required=True, help="CSV file to write")

    def run(self) -> int:
        agent = LexpolAgent.load(self.args.checkpoint)
        emit_dominance_map(agent.actor, suite_from_args(self.args), self.args.res, self.args.phase, self.args.out)
        return 0
