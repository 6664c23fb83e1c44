from . import *
from ..agent import load_experts, merge_single_task_logs
from ..agent.lexpol_agent import load_resume_state, save_resume_state
from ..agent.soundness import actor_case, critic_case, encoder_case, gate_case

QUICK = Schedule(eval_interval=1000, eval_trials=1, checkpoint_interval=1000, log_interval=1000)


def run_trainer(cfg: AgentConfig, budget: int = 40, **kwargs) -> Trainer:
    trainer = Trainer(cfg, small_tmaze(), budget, QUICK, **kwargs)
    trainer.run()
    return trainer


def net_params(net):
    return [p.copy() for p in net.parameters()]


class TestModes(TestCase):
    def build(self, mode: str, **overrides) -> LexpolAgent:
        return LexpolAgent.build(tiny_agent_config(mode, **overrides), 3, 2)

    def test_gated_modes(self) -> None:
        actor = self.build("lexpol").actor
        self.assertEqual(2, actor.k)
        self.assertIsNotNone(actor.gate_net)
        self.assertIsNone(actor.encoders)
        self.assertFalse(actor.trains("context"))
        self.assertTrue(self.build("lexpol", stopgrad=False).actor.trains("context"))

    def test_flat_modes(self) -> None:
        for mode in ("mtsac_flat", "single_task"):
            actor = self.build(mode).actor
            self.assertEqual(1, actor.k)
            self.assertIsNone(actor.gate_net)
            self.assertIsNone(actor.context)
            self.assertEqual(3, actor.critic_input_dim)

    def test_encoder_modes(self) -> None:
        care = self.build("care").actor
        self.assertEqual(1, care.k)
        self.assertEqual(2, care.encoders.k_enc)
        self.assertEqual(6, care.policies[0].state_dim)
        self.assertEqual(3, care.state_dim)
        shared = self.build("lexpol_care").actor
        self.assertTrue(shared.shares_context)
        self.assertEqual([], list(shared.groups()["encoder_context"]))
        separate = self.build("lexpol_care", stopgrad=False).actor
        self.assertFalse(separate.shares_context)
        self.assertTrue(separate.trains("encoder_context"))

    def test_critic_context(self) -> None:
        agent = self.build("lexpol", critic_context=True)
        self.assertEqual(3 + 8, agent.actor.critic_input_dim)
        self.assertEqual(3 + 8 + 2, agent.critics.q1.in_dim)

    def test_frozen_mode_needs_experts(self) -> None:
        with self.assertRaises(ExceptionGroup) as ctx:
            tiny_agent_config("lexpol_frozen")
        self.assertIsInstance(raised_leaves(ctx.exception)[0], ConfigError)


class TestActing(TestCase):
    def test_gated_actor_needs_metadata(self) -> None:
        agent = LexpolAgent.build(tiny_agent_config(), 3, 2)
        with self.assertRaises(TaskLookupError):
            agent.act(np.zeros(3), None)

    def test_flat_actor_ignores_metadata(self) -> None:
        agent = LexpolAgent.build(tiny_agent_config("mtsac_flat"), 3, 2)
        a, lp, weights = agent.act(np.zeros(3), None, "deterministic")
        self.assertEqual((2,), a.shape)
        self.assertTrue(np.all(np.abs(a) < 1.0))
        npt.assert_array_equal([1.0], weights.alpha)

    def test_hard_mode_uses_the_dominant_policy(self) -> None:
        agent = LexpolAgent.build(tiny_agent_config(), 3, 2)
        meta = TaskMetadata("red", RED_TEXT)
        s = np.array([0.0, 0.5, 0.0])
        _, _, weights = agent.act(s, meta, "deterministic")
        j = int(np.argmax(weights.alpha))
        hard, _, _ = agent.act(s, meta, "hard")
        alone = agent.actor.policies[j].sample(s[None, :], None, deterministic=True, cache=False).action[0]
        npt.assert_array_equal(alone, hard)

    def test_deterministic_blend(self) -> None:
        actor = LexpolAgent.build(tiny_agent_config(), 3, 2).actor
        states = np.random.default_rng(0).uniform(-1, 1, (5, 3))
        metas = [TaskMetadata("red", RED_TEXT)] * 5
        out = actor.sample(states, metas, None, deterministic=True, cache=False)
        acts = np.stack([p.sample(states, None, deterministic=True, cache=False).action for p in actor.policies], axis=1)
        npt.assert_allclose(np.einsum("bk,bkm->bm", out.alpha, acts), out.action, rtol=1e-12)
        check_simplex(out.alpha)


class TestModeReductions(TestCase):
    def test_single_policy_gate_matches_flat_training(self) -> None:
        gated = run_trainer(tiny_agent_config("lexpol", k=1))
        flat = run_trainer(tiny_agent_config("mtsac_flat"))
        for a, b in zip(net_params(gated.agent.actor.policies[0].trunk), net_params(flat.agent.actor.policies[0].trunk)):
            npt.assert_array_equal(a, b)
        for a, b in zip(gated.agent.critics.q1.parameters(), flat.agent.critics.q1.parameters()):
            npt.assert_array_equal(a, b)
        self.assertEqual(
            [r["per_task"] for r in gated.log.of_kind("eval")],
            [r["per_task"] for r in flat.log.of_kind("eval")],
        )

    def test_single_encoder_mixture_is_that_encoder(self) -> None:
        actor = LexpolAgent.build(tiny_agent_config("lexpol_care", k_enc=1), 3, 2).actor
        states = np.random.default_rng(1).uniform(-1, 1, (4, 3))
        metas = [TaskMetadata("blue", BLUE_TEXT)] * 4
        out = actor.sample(states, metas, None, deterministic=True, cache=False)
        encoded = actor.encoders.encoders[0].forward(states, cache=False)
        npt.assert_array_equal(encoded, out.state)
        expected = actor.policies[0].sample(encoded, None, deterministic=True, cache=False).action
        npt.assert_allclose(out.samples[0].action, expected, rtol=0, atol=0)


class TestParameterGroups(TestCase):
    def test_stopgrad_freezes_the_context_head(self) -> None:
        frozen = Trainer(tiny_agent_config(), small_tmaze(), 40, QUICK)
        before = frozen.agent.group_hashes()
        frozen.run()
        after = frozen.agent.group_hashes()
        self.assertEqual(before["context"], after["context"])
        self.assertNotEqual(before["gate"], after["gate"])

        trained = Trainer(tiny_agent_config(stopgrad=False), small_tmaze(), 40, QUICK)
        before = trained.agent.group_hashes()
        trained.run()
        self.assertNotEqual(before["context"], trained.agent.group_hashes()["context"])

    def test_frozen_experts_keep_their_weights(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            paths = []
            for seed, name in ((1, "red"), (2, "blue")):
                expert = LexpolAgent.build(tiny_agent_config("mtsac_flat", seed=seed), 3, 2)
                paths.append(str(expert.save(Path(tmp) / name)))
            expected = param_hash(*(head.trunk for head in load_experts(paths)))
            trainer = Trainer(tiny_agent_config("lexpol_frozen", expert_paths=tuple(paths)), small_tmaze(), 40, QUICK)
            before = trainer.agent.group_hashes()
            self.assertEqual(expected, before["policies"])
            trainer.run()
            after = trainer.agent.group_hashes()
        self.assertEqual(before["policies"], after["policies"])
        self.assertNotEqual(before["gate"], after["gate"])

    def test_expert_dims_must_match(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = LexpolAgent.build(tiny_agent_config("mtsac_flat", hidden=(4, 4)), 3, 2).save(Path(tmp) / "e")
            cfg = tiny_agent_config("lexpol_frozen", k=1, expert_paths=(str(path),))
            with self.assertRaises(ConfigError):
                LexpolAgent.build(cfg, 3, 2)


class TestCheckpoints(TestCase):
    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def test_load_then_save_is_byte_identical(self) -> None:
        for mode in ("lexpol", "lexpol_care", "mtsac_flat"):
            agent = LexpolAgent.build(tiny_agent_config(mode), 3, 2)
            agent.save(self.dir / mode / "a")
            LexpolAgent.load(self.dir / mode / "a").save(self.dir / mode / "b")
            for f in ("manifest.txt", "params.bin"):
                self.assertEqual(
                    (self.dir / mode / "a" / f).read_bytes(), (self.dir / mode / "b" / f).read_bytes(), f"{mode} {f}"
                )

    def test_loaded_agent_acts_like_the_original(self) -> None:
        agent = LexpolAgent.build(tiny_agent_config(), 3, 2)
        agent.save(self.dir / "a")
        loaded = LexpolAgent.load(self.dir / "a")
        meta = TaskMetadata("red", RED_TEXT)
        s = np.array([0.1, 0.3, 0.0])
        npt.assert_allclose(agent.act(s, meta, "deterministic")[0], loaded.act(s, meta, "deterministic")[0], atol=1e-5)

    def test_resumed_run_matches_an_uninterrupted_one(self) -> None:
        cfg = tiny_agent_config()
        schedule = Schedule(eval_interval=20, eval_trials=1, checkpoint_interval=20, log_interval=10)
        suite = small_tmaze()
        train(cfg, suite, 60, schedule, self.dir / "straight")
        train(cfg, suite, 60, schedule, self.dir / "resumed", stop_at=40)
        self.assertIsNone(RunLog.read(self.dir / "resumed" / "logs" / "seed_0.log").end)
        train(cfg, suite, 60, schedule, self.dir / "resumed")
        logs = [RunLog.read(self.dir / d / "logs" / "seed_0.log") for d in ("straight", "resumed")]
        self.assertEqual(logs[0].records, logs[1].records)
        states = [np.load(self.dir / d / "ckpt" / "seed_0" / "step_60" / "state.npz") for d in ("straight", "resumed")]
        with states[0] as a, states[1] as b:
            self.assertEqual(sorted(a.files), sorted(b.files))
            for key in a.files:
                npt.assert_array_equal(a[key], b[key], err_msg=key)

    def test_non_finite_update_writes_a_dump(self) -> None:
        trainer = Trainer(tiny_agent_config(), small_tmaze(), 30, QUICK, dump_dir=self.dir)
        with patch.object(LexpolAgent, "update", side_effect=NumericError("non-finite critic loss")):
            with self.assertRaises(NumericError) as ctx:
                trainer.run()
        self.assertEqual(3, exit_code_for(ctx.exception))
        self.assertTrue(any("diagnostic dump" in note for note in ctx.exception.__notes__))
        with np.load(self.dir / "nan_dump.npz") as dump:
            self.assertEqual(11, int(dump["step"]))
            self.assertEqual((16, 3), dump["s"].shape)

    def test_warmup_only_run_is_flagged(self) -> None:
        trainer = Trainer(tiny_agent_config(warmup_steps=10), small_tmaze(), 10, QUICK)
        log = trainer.run()
        self.assertTrue(log.end["warmup_only"])
        self.assertEqual(0, trainer.gradient_steps)

    def test_only_the_newest_checkpoints_are_kept(self) -> None:
        schedule = Schedule(eval_interval=1000, eval_trials=1, checkpoint_interval=20, log_interval=1000, keep_checkpoints=2)
        sizes = {}
        for capacity in (2000, 100_000):
            root = self.dir / str(capacity)
            Trainer(tiny_agent_config(replay_capacity=capacity), small_tmaze(), 60, schedule, ckpt_root=root).run()
            self.assertEqual(["step_40", "step_60"], sorted(d.name for d in root.iterdir()))
            with np.load(root / "step_60" / "state.npz") as state:
                self.assertEqual((60, 3), state["replay/s"].shape)
                self.assertEqual(60, int(state["replay/sizes"].sum()))
            sizes[capacity] = (root / "step_60" / "state.npz").stat().st_size
        self.assertEqual(sizes[2000], sizes[100_000])

    def test_resume_state_missing_entries(self) -> None:
        agent = LexpolAgent.build(tiny_agent_config(), 3, 2)
        replay = ReplayBuffer(2, 3, 2, 100, 8)
        save_resume_state(self.dir, agent, replay)
        with np.load(self.dir / "state.npz") as data:
            arrays = {k: data[k] for k in data.files}
        for key in ("adam/q1/step", "replay/heads"):
            with self.subTest(key):
                np.savez(self.dir / "state.npz", **{k: v for k, v in arrays.items() if k != key})
                with self.assertRaises(CheckpointError) as ctx:
                    load_resume_state(self.dir, LexpolAgent.build(tiny_agent_config(), 3, 2), ReplayBuffer(2, 3, 2, 100, 8))
                self.assertEqual(4, exit_code_for(ctx.exception))

    def test_policy_is_not_consulted_during_warmup(self) -> None:
        budget, warmup = 30, 10
        trainer = Trainer(tiny_agent_config(warmup_steps=warmup), small_tmaze(), budget, QUICK)
        original = CompositeActor.act
        acted_at = []

        def recording_act(actor, *args, **kwargs):
            acted_at.append(trainer.step)
            return original(actor, *args, **kwargs)

        with patch.object(CompositeActor, "act", recording_act):
            trainer.run()
        training = [s for s in acted_at if s < budget]
        self.assertEqual(list(range(warmup, budget)), training)
        self.assertEqual(budget - warmup, trainer.gradient_steps)


class TestSingleTask(TestCase):
    def test_per_task_runs_are_merged(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp)
            log = train(tiny_agent_config("single_task"), small_tmaze(), 20, QUICK, out)
            for task_id in ("blue", "red"):
                self.assertTrue((out / "experts" / "seed_0" / task_id / "manifest.txt").exists())
            self.assertEqual(RunLog.read(out / "logs" / "seed_0.log").records, log.records)
        (record,) = log.of_kind("eval")
        self.assertEqual(2, len(record["per_task"]))
        self.assertEqual({"blue": [1.0], "red": [1.0]}, record["alpha"])
        self.assertEqual(["blue", "red"], log.header["tasks"])

    def test_misaligned_task_logs_rejected(self) -> None:
        a, b = RunLog(), RunLog()
        a.append("eval", step=10, per_task=[1.0], mean=1.0, alpha={}, losses={})
        b.append("eval", step=20, per_task=[0.0], mean=0.0, alpha={}, losses={})
        with self.assertRaises(CheckpointError):
            merge_single_task_logs(small_tmaze(), [a, b], tiny_agent_config("single_task"), 20)


class TestRunLog(TestCase):
    def test_round_trip_and_truncate(self) -> None:
        log = RunLog()
        log.append("run", seed=0, mode="lexpol", suite="tmaze_pair", tasks=["blue", "red"], budget=30)
        for step, mean in ((10, 0.0), (20, 0.5), (30, 1.0)):
            log.append("eval", step=step, per_task=[mean, mean], mean=mean, alpha={}, losses={})
        log.append("end", step=30, gradient_steps=20, warmup_only=False)
        with tempfile.TemporaryDirectory() as tmp:
            log.write(Path(tmp) / "logs" / "seed_0.log")
            again = RunLog.read(Path(tmp) / "logs" / "seed_0.log")
        self.assertEqual(log.records, again.records)
        self.assertEqual([0.0, 0.5, 1.0], [s.mean_success for s in again.snapshots()])
        self.assertEqual(("blue", "red"), again.snapshots()[0].task_ids)
        cut = again.truncate(20)
        self.assertEqual([10, 20], [r["step"] for r in cut.of_kind("eval")])
        self.assertIsNone(cut.end)

    def test_unreadable_record(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "seed_0.log"
            path.write_text('{"kind": "run"}\n{broken\n', encoding="utf-8")
            with self.assertRaises(CheckpointError) as ctx:
                RunLog.read(path)
        self.assertIn(":2:", str(ctx.exception))


class TestSoundness(TestCase):
    def test_critic_and_gate_paths(self) -> None:
        for seed in range(3):
            self.assertTrue(critic_case(seed).passed, f"critic seed {seed}")
            self.assertTrue(gate_case(seed).passed, f"gate seed {seed}")

    def test_encoder_and_actor_paths(self) -> None:
        for seed in range(2):
            report = encoder_case(seed, tol=1e-3)
            self.assertTrue(report.passed, f"encoder seed {seed}: {report.max_rel_err}")
            report = actor_case(seed, tol=1e-3)
            self.assertTrue(report.passed, f"actor seed {seed}: {report.max_rel_err}")
