from .command_base import CommandBase
from .imports import *

logger = logging.getLogger(__name__)


def train_seed(config_path: str, seed_index: int, output_dir: str, resume: bool, stop_at: Optional[int]):
    """Train one seed from a written config, so process workers only receive paths."""
    exp = load_config(config_path)
    run = exp.run
    cfg = exp.for_seed_index(seed_index).agent
    suite = resolve_suite(run.suite_file or run.suite, run.suite_params())
    return train(
        cfg,
        suite,
        run.budget_steps,
        Schedule.from_run(run),
        output_dir,
        seed_index,
        resume=resume,
        stop_at=stop_at,
    )


class TrainCommand(CommandBase):
    NAME = "train"
    DESCRIPTION = "Train every seed of a config and write the run report."

    @staticmethod
    def add_args(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("config", help="key = value config file")
        parser.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
        parser.add_argument("--output", help="output directory (overrides output_dir)")
        parser.add_argument("--parallel", type=int, default=None, help="seed workers (overrides parallel)")
        parser.add_argument("--no-resume", dest="resume", action="store_false", help="ignore existing checkpoints")
        parser.add_argument("--stop-at", type=int, default=None, help=argparse.SUPPRESS)

    def run(self) -> int:
        args = self.args
        exp = load_config(args.config)
        resolve_suite(exp.run.suite_file or exp.run.suite, exp.run.suite_params())
        if args.dry_run:
            sys.stdout.write(exp.dump())
            return 0
        if args.parallel is not None:
            exp = dataclasses.replace(exp, run=dataclasses.replace(exp.run, parallel=args.parallel))
        run = exp.run
        out = Path(args.output) if args.output else run.resolved_output_dir(args.config)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.copy").write_text(exp.dump(), encoding="utf-8")
        jobs = [(str(out / "config.copy"), i, str(out), args.resume, args.stop_at) for i in range(len(run.seeds))]
        labels = [f"seed {s}" for s in run.seeds]
        stack = ExceptionStack(message="Training failed")
        if run.parallel > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=run.parallel) as pool:
                futures = [pool.submit(train_seed, *job) for job in jobs]
                logs = stack.map(lambda f: f.result(), [(f,) for f in futures], labels).join()
        else:
            logs = stack.map(train_seed, jobs, labels).join()
        stack.resolve()
        if args.stop_at is not None and any(log.end is None for log in logs):
            logger.info("stopped before the budget; no report written")
            return 0
        series = {i: log.snapshots() for i, log in enumerate(logs)}
        records = {i: log.of_kind("eval") for i, log in enumerate(logs)}
        report = write_run_report(out, series, records, out.name, run.success_threshold)
        sys.stdout.write((out / "report" / "summary.txt").read_text(encoding="utf-8"))
        logger.info("best mean %.3f at step %d (%s)", report.best_mean, report.best_step, out)
        return 0
