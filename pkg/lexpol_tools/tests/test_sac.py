from . import *
from ..nn import adam_step
from ..sac import actor_update, critic_update


class TestGaussianPolicyHead(TestCase):
    def setUp(self) -> None:
        self.rng = np.random.default_rng(0)
        self.head = GaussianPolicyHead.build(3, 1, (8,), self.rng)
        self.states = self.rng.uniform(-1, 1, (16, 3))

    def test_actions_are_squashed(self) -> None:
        smp = self.head.sample(self.states, self.rng)
        self.assertEqual((16, 1), smp.action.shape)
        self.assertTrue(np.all(np.abs(smp.action) < 1.0))

    def test_log_prob_is_change_of_variables(self) -> None:
        smp = self.head.sample(self.states, self.rng)
        u = smp.mean + smp.std * smp.noise
        expected = stats.norm.logpdf(u, smp.mean, smp.std)[:, 0] - np.log(1.0 - np.tanh(u[:, 0]) ** 2)
        npt.assert_allclose(expected, smp.log_prob, rtol=1e-9, atol=1e-9)

    def test_deterministic_is_tanh_of_mean(self) -> None:
        smp = self.head.sample(self.states, deterministic=True)
        npt.assert_array_equal(np.tanh(smp.mean), smp.action)

    def test_stochastic_needs_generator(self) -> None:
        with self.assertRaises(ShapeError):
            self.head.sample(self.states)

    def test_log_std_is_clamped(self) -> None:
        head = GaussianPolicyHead(self.head.trunk, (-0.5, -0.4))
        smp = head.sample(self.states, self.rng)
        self.assertTrue(np.all(smp.log_std >= -0.5) and np.all(smp.log_std <= -0.4))

    def test_backward_matches_finite_differences(self) -> None:
        noise_seed = 5
        w = self.rng.normal(size=(16, 1))

        def loss() -> float:
            smp = self.head.sample(self.states, np.random.default_rng(noise_seed), cache=False)
            return float(np.sum(w * smp.action) + 0.3 * np.sum(smp.log_prob))

        self.head.trunk.zero_grad()
        smp = self.head.sample(self.states, np.random.default_rng(noise_seed))
        self.head.backward(smp, w, np.full(16, 0.3))
        analytic = [a.copy() for a in self.head.trunk.tape.arrays()]
        numeric = numeric_gradient(self.head.trunk.parameters(), loss)
        report = compare_gradients(analytic, numeric, 1e-4)
        assert report.passed, f"max relative error {report.max_rel_err}"


class TestReplayBuffer(TestCase):
    def setUp(self) -> None:
        self.buf = ReplayBuffer(3, 2, 1, capacity=30, batch_per_task=4)
        for step in range(45):
            task = step % 3
            self.buf.add(Transition(task, np.full(2, step), np.zeros(1), float(step), np.full(2, step + 1), False))

    def test_ring_per_task(self) -> None:
        self.assertEqual(10, self.buf.per_task_capacity)
        self.assertEqual(30, len(self.buf))
        # task 0 saw steps 0, 3, ..., 42; the oldest five were overwritten
        self.assertEqual(set(range(15, 45, 3)), set(self.buf.r[0].astype(int)))

    def test_batches_are_stratified(self) -> None:
        batch = self.buf.sample(np.random.default_rng(0))
        self.assertEqual(12, len(batch))
        self.assertEqual([4, 4, 4], np.bincount(batch.task).tolist())
        npt.assert_array_equal(batch.r.astype(int) % 3, batch.task)

    def test_state_dict_round_trip(self) -> None:
        other = ReplayBuffer(3, 2, 1, capacity=30, batch_per_task=4)
        other.load_state_dict({k: v.copy() for k, v in self.buf.state_dict().items()})
        a, b = self.buf.sample(np.random.default_rng(7)), other.sample(np.random.default_rng(7))
        npt.assert_array_equal(a.s, b.s)
        npt.assert_array_equal(a.r, b.r)

    def test_errors(self) -> None:
        with self.assertRaises(ArgumentError):
            ReplayBuffer(2, 2, 1, capacity=10).sample(np.random.default_rng(0))
        with self.assertRaises(ArgumentError):
            self.buf.add(Transition(3, np.zeros(2), np.zeros(1), 0.0, np.zeros(2), False))
        with self.assertRaises(ShapeError):
            self.buf.add(Transition(0, np.zeros(3), np.zeros(1), 0.0, np.zeros(3), False))


class _Out:
    def __init__(self, action, log_prob) -> None:
        self.action = action
        self.log_prob = log_prob


class FixedActor:
    """Zero actions with a fixed log-probability."""

    def __init__(self, log_prob: float) -> None:
        self._log_prob = log_prob

    def sample(self, states, metas, rng, deterministic=False, cache=True):
        return _Out(np.zeros((len(states), 1)), np.full(len(states), self._log_prob))

    def critic_state(self, states, metas):
        return states


class HeadActor:
    """A single Gaussian head driven through the actor interface."""

    def __init__(self, head: GaussianPolicyHead, lr: float = 0.01) -> None:
        self.head = head
        self.opt = AdamState.for_net(head.trunk, lr=lr)

    def sample(self, states, metas, rng, deterministic=False, cache=True):
        return self.head.sample(states, rng, deterministic, cache)

    def backward(self, out, d_action, d_log_prob):
        self.head.backward(out, d_action, d_log_prob)

    def step(self):
        adam_step(self.head.trunk, self.head.trunk.tape, self.opt)

    def critic_state(self, states, metas):
        return states


def constant_critics(rng: np.random.Generator, q1_value: float, q2_value: float) -> TwinCritics:
    built = TwinCritics.build(2, 1, (8,), rng)
    for q, value in ((built.q1, q1_value), (built.q2, q2_value)):
        q.weights[-1][...] = 0.0
        q.biases[-1][...] = value
    return TwinCritics(built.q1, built.q2)


class TestSacUpdates(TestCase):
    def setUp(self) -> None:
        self.rng = np.random.default_rng(0)
        self.critics = TwinCritics.build(2, 1, (8,), self.rng)
        self.batch = Batch(
            task=np.zeros(4, dtype=np.int64),
            s=self.rng.normal(size=(4, 2)),
            a=self.rng.uniform(-1, 1, (4, 1)),
            r=np.array([1.0, -1.0, 0.5, 0.0]),
            s_next=self.rng.normal(size=(4, 2)),
            done=np.array([True, False, True, False]),
            ctx=np.zeros(4, dtype=np.int64),
            ctx_next=np.zeros(4, dtype=np.int64),
        )

    def test_critic_targets(self) -> None:
        temp = EntropyTemp.build(1, init_log_alpha=np.log(0.5))
        actor = FixedActor(log_prob=-2.0)
        y = critic_targets(self.critics, self.batch, actor, temp, 0.9, None)
        x_next = np.concatenate([self.batch.s_next, np.zeros((4, 1))], axis=-1)
        soft = self.critics.target_min(x_next) + 0.5 * 2.0
        npt.assert_allclose([1.0, -1.0 + 0.9 * soft[1], 0.5, 0.9 * soft[3]], y, rtol=1e-12)

    def test_polyak(self) -> None:
        before = [t.copy() for t in self.critics.target1.parameters()]
        for p in self.critics.q1.parameters():
            p += 1.0
        polyak(self.critics)
        for b, t, o in zip(before, self.critics.target1.parameters(), self.critics.q1.parameters()):
            npt.assert_allclose(0.995 * b + 0.005 * o, t, rtol=1e-12)

    def test_temperature_rises_when_entropy_is_too_low(self) -> None:
        temp = EntropyTemp.build(2, init_log_alpha=0.0, lr=0.01)
        self.assertEqual(-2.0, temp.target_entropy)
        temp_update(temp, np.full(8, 10.0))
        self.assertGreater(float(temp.log_alpha[0]), 0.0)

    def test_fixed_temperature(self) -> None:
        temp = EntropyTemp.build(2, init_log_alpha=-1.0, learn=False)
        temp_update(temp, np.full(8, 10.0))
        self.assertEqual(-1.0, float(temp.log_alpha[0]))

    def test_tau_range(self) -> None:
        with self.assertRaises(ValueError):
            TwinCritics(self.critics.q1, self.critics.q2, tau=0.0)

    def test_terminal_discount_zero_gives_the_reward(self) -> None:
        temp = EntropyTemp.build(1, init_log_alpha=np.log(0.5))
        y = critic_targets(self.critics, self.batch, FixedActor(log_prob=-2.0), temp, 0.0, None)
        npt.assert_array_equal(self.batch.r, y)

    def test_critic_loss_for_one_transition(self) -> None:
        critics = constant_critics(self.rng, 0.5, -0.25)
        batch = Batch(
            task=np.zeros(1, dtype=np.int64),
            s=np.array([[0.2, -0.1]]),
            a=np.array([[0.3]]),
            r=np.array([1.0]),
            s_next=np.array([[0.4, 0.0]]),
            done=np.array([False]),
            ctx=np.zeros(1, dtype=np.int64),
            ctx_next=np.zeros(1, dtype=np.int64),
        )
        temp = EntropyTemp.build(1, init_log_alpha=np.log(0.5))
        before = param_hash(critics.q1, critics.q2)
        loss = critic_update(critics, batch, FixedActor(log_prob=-2.0), temp, 0.9, None, apply=False)
        # y = 1 + 0.9 * (min(0.5, -0.25) + 0.5 * 2) = 1.675
        self.assertAlmostEqual((0.5 - 1.675) ** 2 + (-0.25 - 1.675) ** 2, loss, places=12)
        self.assertAlmostEqual(5.08625, loss, places=12)
        self.assertEqual(before, param_hash(critics.q1, critics.q2))

    def test_flat_critics_without_entropy_give_no_actor_gradient(self) -> None:
        critics = constant_critics(self.rng, 1.5, 2.0)
        actor = HeadActor(GaussianPolicyHead.build(2, 1, (8,), self.rng, final_scale=1.0))
        temp = EntropyTemp.build(1, init_log_alpha=-np.inf, learn=False)
        self.assertEqual(0.0, temp.alpha)
        actor.head.trunk.zero_grad()
        loss, _ = actor_update(actor, critics, self.batch, temp, np.random.default_rng(3), apply=False)
        self.assertAlmostEqual(-1.5, loss, places=12)
        for grad in actor.head.trunk.tape.arrays():
            npt.assert_array_equal(np.zeros_like(grad), grad)

    def test_entropy_term_alone_widens_the_policy(self) -> None:
        critics = constant_critics(self.rng, 0.0, 0.0)
        head = GaussianPolicyHead.build(2, 1, (8,), self.rng)
        head.trunk.weights[-1][...] = 0.0
        head.trunk.biases[-1][...] = [0.0, -2.0]
        actor = HeadActor(head, lr=0.01)
        temp = EntropyTemp.build(1, init_log_alpha=0.0, learn=False)
        states = self.rng.normal(size=(64, 2))
        batch = Batch(
            task=np.zeros(64, dtype=np.int64),
            s=states,
            a=np.zeros((64, 1)),
            r=np.zeros(64),
            s_next=states,
            done=np.zeros(64, dtype=bool),
            ctx=np.zeros(64, dtype=np.int64),
            ctx_next=np.zeros(64, dtype=np.int64),
        )
        noise = np.random.default_rng(4)
        for _ in range(20):
            actor_update(actor, critics, batch, temp, noise)
        log_std = head.sample(states, deterministic=True, cache=False).log_std
        self.assertGreater(float(np.mean(log_std)), -1.9)
