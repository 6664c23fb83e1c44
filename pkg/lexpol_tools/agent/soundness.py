"""Finite-difference checks of every gradient path the agent trains through.

Four cases per seeded instance: the critic regression loss, the gate path
(loss through the blend weights only), the state-encoder mixture, and the
full actor loss of a small ``lexpol_care`` agent with trainable context
heads, where every actor parameter group receives gradient.
"""

import dataclasses
import logging
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from ..context import ContextEncoder, TaskMetadata
from ..mixture import EncoderMixture, blend_actions, gate
from ..nn import DenseNet, GradCheckReport, compare_gradients, grad_check, mlp, near_kink, numeric_gradient, softmax_backward
from ..sac import Batch, actor_update
from .config import AgentConfig
from .lexpol_agent import LexpolAgent

logger = logging.getLogger(__name__)

STATE_DIM = 3
ACTION_DIM = 2
BATCH = 4
MAX_RESAMPLES = 50

METAS = (TaskMetadata("red", "go to the red goal"), TaskMetadata("blue", "go to the blue goal"))


@dataclasses.dataclass(frozen=True)
class SoundnessCase:
    name: str
    seed: int
    report: GradCheckReport

    @property
    def passed(self) -> bool:
        return self.report.passed


def tiny_config(seed: int, mode: str = "lexpol_care") -> AgentConfig:
    return AgentConfig(
        mode=mode,
        k=3,
        n=6,
        stopgrad=False,
        raw_embed_dim=6,
        context_hidden=6,
        gate_hidden=(6,),
        k_enc=2,
        encoder_hidden=6,
        repr_dim=5,
        hidden=(8, 8),
        actor_final_scale=1.0,
        seed=seed,
    )


def _compare_nets(nets: Sequence[DenseNet], loss: Callable[[], float], tol: float) -> GradCheckReport:
    analytic = [a.copy() for net in nets for a in net.tape.arrays()]
    numeric = [g for net in nets for g in numeric_gradient(net.parameters(), loss)]
    return compare_gradients(analytic, numeric, tol)


def critic_case(seed: int, tol: float = 1e-4) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    q = mlp(STATE_DIM + ACTION_DIM, (8, 8), 1, rng)

    def loss_fn(net: DenseNet, point: Tuple[np.ndarray, np.ndarray]):
        x, y = point
        err = net.forward(x)[:, 0] - y
        return float(np.mean(err * err)), (2.0 * err / err.size)[:, None]

    return grad_check(
        q,
        loss_fn,
        tol,
        sample_point=lambda r: (r.uniform(-1, 1, (BATCH, STATE_DIM + ACTION_DIM)), r.normal(size=BATCH)),
        rng=rng,
    )


def gate_case(seed: int, tol: float = 1e-4, n: int = 6, k: int = 3) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    g = mlp(n, (6,), k, rng)

    def loss_fn(net: DenseNet, point):
        z, acts, w = point
        weights = gate(net, z)
        a = blend_actions(acts, weights.alpha)
        d_alpha = np.einsum("bkm,bm->bk", acts, w)
        return float(np.sum(w * a)), softmax_backward(weights.alpha, d_alpha)

    return grad_check(
        g,
        loss_fn,
        tol,
        sample_point=lambda r: (
            r.normal(size=(BATCH, n)),
            np.tanh(r.normal(size=(BATCH, k, ACTION_DIM))),
            r.normal(size=(BATCH, ACTION_DIM)),
        ),
        rng=rng,
    )


def encoder_case(seed: int, tol: float = 1e-4) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    context = ContextEncoder("hashed", n=6)
    enc = EncoderMixture.build(3, STATE_DIM, 4, [6], [6], context, rng, rng)
    nets = list(enc.networks().values())
    for _ in range(MAX_RESAMPLES):
        s = rng.uniform(-1, 1, (BATCH, STATE_DIM))
        z = rng.normal(size=(BATCH, context.n))
        w = rng.normal(size=(BATCH, enc.repr_dim))
        for net in nets:
            net.zero_grad()
        out = enc.forward(s, z)
        if not any(near_kink(net) for net in nets):
            break
    enc.backward(out, w)
    return _compare_nets(nets, lambda: float(np.sum(w * enc.forward(s, z, cache=False).state)), tol)


def actor_case(seed: int, tol: float = 1e-4, cfg: AgentConfig = None) -> GradCheckReport:
    """Actor loss of a composite agent against every trainable actor network."""
    cfg = cfg or tiny_config(seed)
    rng = np.random.default_rng(seed)
    agent = LexpolAgent.build(cfg, STATE_DIM, ACTION_DIM)
    actor, critics, temp = agent.actor, agent.critics, agent.temp
    temp.log_alpha[0] = np.log(0.2)
    watched = [actor.networks()[name] for g, nets in actor.groups().items() if actor.trains(g) for name in nets]
    probed = watched + [critics.q1, critics.q2]
    for _ in range(MAX_RESAMPLES):
        states = rng.uniform(-1, 1, (BATCH, STATE_DIM))
        metas = [METAS[i % len(METAS)] for i in range(BATCH)]
        noise_seed = int(rng.integers(2**31))
        batch = Batch(
            task=np.zeros(BATCH, dtype=np.int64),
            s=states,
            a=np.zeros((BATCH, ACTION_DIM)),
            r=np.zeros(BATCH),
            s_next=states,
            done=np.zeros(BATCH, dtype=bool),
            ctx=np.zeros(BATCH, dtype=np.int64),
            ctx_next=np.zeros(BATCH, dtype=np.int64),
            meta=metas,
            meta_next=metas,
        )
        actor.zero_grad()
        actor_update(actor, critics, batch, temp, np.random.default_rng(noise_seed), apply=False)
        if not any(near_kink(net) for net in probed):
            break

    def loss() -> float:
        out = actor.sample(states, metas, np.random.default_rng(noise_seed), cache=False)
        x = np.concatenate([actor.critic_state(states, metas), out.action], axis=-1)
        q = np.minimum(critics.q1.forward(x, cache=False), critics.q2.forward(x, cache=False))[:, 0]
        return float(np.mean(temp.alpha * out.log_prob - q))

    return _compare_nets(watched, loss, tol)


CASES: Dict[str, Callable[[int, float], GradCheckReport]] = {
    "critic": critic_case,
    "gate": gate_case,
    "encoder_mixture": encoder_case,
    "actor": actor_case,
}


def run_soundness_suite(instances: int = 20, tol: float = 1e-4, first_seed: int = 0) -> List[SoundnessCase]:
    results = []
    for seed in range(first_seed, first_seed + instances):
        for name, case in CASES.items():
            report = case(seed, tol)
            results.append(SoundnessCase(name, seed, report))
            log = logger.info if report.passed else logger.error
            log("%s seed %d: max relative error %.3g", name, seed, report.max_rel_err)
    return results
