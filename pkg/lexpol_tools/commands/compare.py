from .command_base import CommandBase
from .imports import *


class CompareCommand(CommandBase):
    NAME = "compare"
    DESCRIPTION = "Tabulate several runs and test the leader against the others."

    @staticmethod
    def add_args(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("runs", nargs="+", help="run output directories")
        parser.add_argument("--out", help="also write the table to this file")
        parser.add_argument("--at-step", type=int, default=None, help="ignore evaluations after this step")
        parser.add_argument("--num-comparisons", type=int, default=None, help="Bonferroni family size")
        parser.add_argument("--threshold", type=float, default=0.9)
        parser.add_argument("--alpha", type=float, default=0.05)

    def run(self) -> int:
        a = self.args
        text, _ = compare(a.runs, a.out, a.at_step, a.num_comparisons, a.threshold, a.alpha)
        sys.stdout.write(text)
        return 0
