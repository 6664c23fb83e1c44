from .command_base import CommandBase, add_suite_args, suite_from_args
from .imports import *


class EvaluateCommand(CommandBase):
    NAME = "eval"
    DESCRIPTION = "Run deterministic evaluation episodes with a saved agent."

    @staticmethod
    def add_args(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("checkpoint", help="checkpoint directory")
        add_suite_args(parser)
        parser.add_argument("--trials", type=int, default=5)
        parser.add_argument("--seed", type=int, default=0, help="seed of the episode start states")
        parser.add_argument("--trajectory", help="write every visited state with its gate weights to this CSV")

    def run(self) -> int:
        args = self.args
        if args.trials < 1:
            raise ArgumentError(f"--trials must be positive, got {args.trials}")
        agent = LexpolAgent.load(args.checkpoint)
        suite = suite_from_args(args)
        rng = np.random.default_rng(args.seed)
        if args.trajectory:
            with TrajectoryWriter(args.trajectory) as writer:
                snap = evaluate(agent, suite, args.trials, rng, record=writer)
        else:
            snap = evaluate(agent, suite, args.trials, rng)
        result = {"mean": snap.mean_success, "per_task": dict(zip(snap.task_ids, snap.per_task_success))}
        sys.stdout.write(json.dumps(result, sort_keys=True) + "\n")
        return 0
