from . import *
from ..agent import SoundnessCase
from ..commands import build_parser, main
from ..commands import gradcheck as gradcheck_command
from ..evaluation import read_series_csv

TINY = """\
mode = lexpol
k = 2
n = 8
raw_embed_dim = 8
context_hidden = 8
gate_hidden = 8
k_enc = 2
encoder_hidden = 8
repr_dim = 6
hidden = 16, 16
batch_per_task = 8
replay_capacity = 2000
warmup_steps = 10

suite = tmaze_pair
horizon = 20
budget_steps = 40
eval_interval = 20
eval_trials = 1
checkpoint_interval = 20
seeds = 0, 1
"""


def run_cli(*argv: str):
    out = io.StringIO()
    with contextlib.redirect_stdout(out):
        code = main([str(a) for a in argv])
    return code, out.getvalue()


class TestParser(TestCase):
    def test_verbs(self) -> None:
        parser = build_parser()
        for verb in ("train", "eval", "map", "compare", "gradcheck"):
            with self.subTest(verb):
                with contextlib.redirect_stdout(io.StringIO()), self.assertRaises(SystemExit) as ctx:
                    parser.parse_args([verb, "--help"])
                self.assertEqual(0, ctx.exception.code)

    def test_map_needs_an_output(self) -> None:
        with contextlib.redirect_stderr(io.StringIO()), self.assertRaises(SystemExit):
            build_parser().parse_args(["map", "ckpt", "tmaze_composite"])


class TestCommands(TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = Path(cls.tmp.name)
        cls.config = cls.dir / "tiny.cfg"
        cls.config.write_text(TINY, encoding="utf-8")
        cls.out = cls.dir / "tiny_run"
        cls.code, cls.stdout = run_cli("--log-level", "WARNING", "train", cls.config, "--output", cls.out)
        cls.ckpt = cls.out / "ckpt" / "seed_0" / "step_40"

    @classmethod
    def tearDownClass(cls) -> None:
        cls.tmp.cleanup()

    def test_dry_run(self) -> None:
        code, text = run_cli("train", self.config, "--dry-run")
        self.assertEqual(0, code)
        self.assertIn("discount = 0.99", text)
        self.assertIn("horizon = 20", text)
        self.assertEqual(parse_config(TINY), parse_config(text))

    def test_dry_run_shows_defaults(self) -> None:
        path = self.dir / "minimal.cfg"
        path.write_text("mode = care\nsuite = tmaze_pair\nbudget_steps = 100\n", encoding="utf-8")
        code, text = run_cli("train", path, "--dry-run")
        self.assertEqual(0, code)
        self.assertIn("discount = 0.99", text)
        self.assertIn("horizon = 150", text)

    def test_config_errors_exit_with_2(self) -> None:
        path = self.dir / "no_mode.cfg"
        path.write_text("suite = tmaze_pair\nbudget_steps = 100\n", encoding="utf-8")
        with self.assertLogs("lexpol_tools", "ERROR") as logs:
            self.assertEqual(2, run_cli("train", path, "--dry-run")[0])
        self.assertTrue(any("mode" in line for line in logs.output))
        path.write_text("mode = lexpol\nsuite = mt50\nbudget_steps = 100\n", encoding="utf-8")
        with self.assertLogs("lexpol_tools", "ERROR"):
            self.assertEqual(2, run_cli("train", path, "--dry-run")[0])

    def test_train_writes_the_run_directory(self) -> None:
        self.assertEqual(0, self.code)
        self.assertTrue((self.out / "config.copy").exists())
        for name in ("series_seed_0.csv", "series_seed_1.csv", "gates_seed_0.csv", "summary.txt"):
            self.assertTrue((self.out / "report" / name).exists(), name)
        summary = (self.out / "report" / "summary.txt").read_text(encoding="utf-8")
        self.assertEqual(summary, self.stdout)
        self.assertIn("tiny_run", summary)
        self.assertEqual([20, 40], [s.step for s in read_series_csv(self.out / "report" / "series_seed_0.csv")])
        self.assertTrue((self.ckpt / "progress.json").exists())

    def test_rerun_resumes_to_the_same_report(self) -> None:
        code, text = run_cli("--log-level", "WARNING", "train", self.config, "--output", self.out)
        self.assertEqual(0, code)
        self.assertEqual(self.stdout, text)

    def test_eval(self) -> None:
        code, text = run_cli("eval", self.ckpt, "tmaze_pair", "--config", self.config, "--trials", 2)
        self.assertEqual(0, code)
        result = json.loads(text)
        self.assertEqual({"blue", "red"}, set(result["per_task"]))
        self.assertTrue(0.0 <= result["mean"] <= 1.0)

    def test_eval_trajectory(self) -> None:
        path = self.dir / "traj.csv"
        code, _ = run_cli("eval", self.ckpt, "tmaze_pair", "--config", self.config, "--trials", 1, "--trajectory", path)
        self.assertEqual(0, code)
        header = path.read_text(encoding="utf-8").splitlines()[0]
        self.assertEqual("task_id,trial,step,x,y,phase,reward,alpha_0,alpha_1", header)

    def test_eval_errors(self) -> None:
        with self.assertLogs("lexpol_tools", "ERROR"):
            self.assertEqual(4, run_cli("eval", self.dir / "nowhere", "tmaze_pair")[0])
        with self.assertLogs("lexpol_tools", "ERROR"):
            self.assertEqual(2, run_cli("eval", self.ckpt, "no_such_suite")[0])
        with self.assertLogs("lexpol_tools", "ERROR"):
            self.assertEqual(2, run_cli("eval", self.ckpt, "nav_k_tasks")[0])

    def test_map(self) -> None:
        path = self.dir / "maps" / "red.csv"
        code, _ = run_cli("map", self.ckpt, "tmaze_composite", "--res", 6, "--out", path)
        self.assertEqual(0, code)
        dmap = DominanceMap.read_csv(path)
        self.assertEqual(("seek_red", 6), (dmap.phase, dmap.res))
        self.assertEqual(len(dmap.x), len(dmap.argmax_idx))

    def test_compare(self) -> None:
        path = self.dir / "table.txt"
        code, text = run_cli("compare", self.out, "--out", path)
        self.assertEqual(0, code)
        self.assertTrue(text.splitlines()[2].startswith("tiny_run"))
        self.assertEqual(text, path.read_text(encoding="utf-8"))


class TestInterruptedTraining(TestCase):
    def test_stop_at_skips_the_report(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            config = Path(tmp) / "tiny.cfg"
            config.write_text(TINY.replace("seeds = 0, 1", "seeds = 3"), encoding="utf-8")
            out = Path(tmp) / "run"
            code, text = run_cli("--log-level", "WARNING", "train", config, "--output", out, "--stop-at", 20)
            self.assertEqual((0, ""), (code, text))
            self.assertFalse((out / "report").exists())
            self.assertTrue((out / "ckpt" / "seed_0" / "step_20" / "progress.json").exists())
            code, text = run_cli("--log-level", "WARNING", "train", config, "--output", out)
            self.assertEqual(0, code)
            self.assertTrue((out / "report" / "summary.txt").exists())


class TestGradcheck(TestCase):
    def cases(self, *errors: float):
        return [
            SoundnessCase("critic", seed, compare_gradients([np.array([1.0])], [np.array([1.0 + e])], tol=1e-4))
            for seed, e in enumerate(errors)
        ]

    def test_all_passing(self) -> None:
        with patch.object(gradcheck_command, "run_soundness_suite", return_value=self.cases(0.0, 1e-7)) as suite:
            code, text = run_cli("gradcheck", "--instances", 2, "--tol", 1e-4, "--seed", 5)
        suite.assert_called_once_with(2, 1e-4, 5)
        self.assertEqual(0, code)
        self.assertEqual(["ok", "ok"], [line.split("\t")[-1] for line in text.splitlines()])

    def test_failure_exits_with_3(self) -> None:
        with patch.object(gradcheck_command, "run_soundness_suite", return_value=self.cases(0.0, 0.5)):
            with self.assertLogs("lexpol_tools", "ERROR") as logs:
                code, text = run_cli("gradcheck", "--instances", 2)
        self.assertEqual(3, code)
        self.assertIn("FAIL", text)
        self.assertTrue(any("1 of 2" in line for line in logs.output))
