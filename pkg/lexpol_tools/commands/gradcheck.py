from .command_base import CommandBase
from .imports import *


class GradcheckCommand(CommandBase):
    NAME = "gradcheck"
    DESCRIPTION = "Compare analytic gradients with finite differences."

    @staticmethod
    def add_args(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--instances", type=int, default=20)
        parser.add_argument("--tol", type=float, default=1e-4)
        parser.add_argument("--seed", type=int, default=0, help="first instance seed")

    def run(self) -> int:
        results = run_soundness_suite(self.args.instances, self.args.tol, self.args.seed)
        failed = [r for r in results if not r.passed]
        for r in results:
            sys.stdout.write(f"{r.name}\t{r.seed}\t{r.report.max_rel_err:.3e}\t{'ok' if r.passed else 'FAIL'}\n")
        if failed:
            raise NumericError(f"{len(failed)} of {len(results)} gradient checks failed")
        return 0
