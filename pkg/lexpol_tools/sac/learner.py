"""Soft actor-critic updates.

The updates are written against the small ``SacActor`` protocol rather than a
concrete policy, so the same code trains a single Gaussian head, a mixture of
heads behind a gate, or a mixture with frozen experts.
"""

import dataclasses
import logging
from typing import Any, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from ..nn import AdamState, adam_step, adam_update
from ..utils.errors import ArgumentError, NumericError
from .critics import TwinCritics
from .replay import Batch

logger = logging.getLogger(__name__)


class ActorOutput(Protocol):
    action: np.ndarray
    log_prob: np.ndarray


class SacActor(Protocol):
    def sample(
        self,
        states: np.ndarray,
        metas: Sequence[Any],
        rng: Optional[np.random.Generator],
        deterministic: bool = False,
        cache: bool = True,
    ) -> ActorOutput: ...

    def backward(self, out: ActorOutput, d_action: np.ndarray, d_log_prob: np.ndarray) -> None: ...

    def step(self) -> None: ...

    def critic_state(self, states: np.ndarray, metas: Sequence[Any]) -> np.ndarray: ...


@dataclasses.dataclass
class EntropyTemp:
    log_alpha: np.ndarray
    target_entropy: float
    learn: bool = True
    opt: Optional[AdamState] = None

    @classmethod
    def build(
        cls,
        action_dim: int,
        init_log_alpha: float = 0.0,
        target_entropy: Optional[float] = None,
        learn: bool = True,
        lr: float = 3e-4,
        betas: Tuple[float, float] = (0.9, 0.999),
    ) -> "EntropyTemp":
        log_alpha = np.array([init_log_alpha], dtype=np.float64)
        return cls(
            log_alpha=log_alpha,
            target_entropy=-float(action_dim) if target_entropy is None else float(target_entropy),
            learn=learn,
            opt=AdamState.for_arrays([log_alpha], lr=lr, beta1=betas[0], beta2=betas[1]),
        )

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))


def _check_batch(batch: Batch) -> None:
    if batch is None or len(batch) == 0:
        raise ArgumentError("SAC update needs a non-empty batch")


def _finite(name: str, value: float) -> float:
    if not np.isfinite(value):
        raise NumericError(f"{name} is not finite: {value}")
    return float(value)


def critic_targets(
    c: TwinCritics,
    batch: Batch,
    actor: SacActor,
    temp: EntropyTemp,
    gamma: float,
    rng: Optional[np.random.Generator],
) -> np.ndarray:
    """y = r + gamma (1 - done) (min target Q(s', a') - alpha log pi(a'|s'))."""
    next_out = actor.sample(batch.s_next, batch.meta_next, rng, cache=False)
    x_next = np.concatenate([actor.critic_state(batch.s_next, batch.meta_next), next_out.action], axis=-1)
    soft_q = c.target_min(x_next) - temp.alpha * next_out.log_prob
    return batch.r + gamma * (1.0 - batch.done.astype(np.float64)) * soft_q


def critic_update(
    c: TwinCritics,
    batch: Batch,
    actor: SacActor,
    temp: EntropyTemp,
    gamma: float = 0.99,
    rng: Optional[np.random.Generator] = None,
    apply: bool = True,
) -> float:
    """Regress both critics onto the soft Bellman target; returns the summed MSE."""
    _check_batch(batch)
    y = critic_targets(c, batch, actor, temp, gamma, rng)
    x = np.concatenate([actor.critic_state(batch.s, batch.meta), batch.a], axis=-1)
    total = 0.0
    for q, opt in ((c.q1, c.opt1), (c.q2, c.opt2)):
        pred = q.forward(x)[:, 0]
        err = pred - y
        total += float(np.mean(err * err))
        if apply:
            q.backward((2.0 * err / err.size)[:, None])
            adam_step(q, q.tape, opt)
    return _finite("critic loss", total)


def actor_update(
    actor: SacActor,
    c: TwinCritics,
    batch: Batch,
    temp: EntropyTemp,
    rng: Optional[np.random.Generator] = None,
    apply: bool = True,
) -> Tuple[float, np.ndarray]:
    """mean(alpha log pi(a|s) - min Q(s, a)) with a reparameterized.

    Returns the loss and the batch log-probabilities (for the temperature).
    Critic parameters receive no gradient from this loss.
    """
    _check_batch(batch)
    out = actor.sample(batch.s, batch.meta, rng, cache=True)
    feats = actor.critic_state(batch.s, batch.meta)
    x = np.concatenate([feats, out.action], axis=-1)
    q1 = c.q1.forward(x)[:, 0]
    q2 = c.q2.forward(x)[:, 0]
    use_q1 = q1 <= q2
    min_q = np.where(use_q1, q1, q2)
    n = min_q.shape[0]
    loss = float(np.mean(temp.alpha * out.log_prob - min_q))
    # d(-min q)/dx, routed through whichever critic attained the minimum
    pick1 = use_q1.astype(np.float64)
    c.q1.backward((-pick1 / n)[:, None], accumulate_params=False)
    dx = c.q1.tape.input.copy()
    c.q2.backward((-(1.0 - pick1) / n)[:, None], accumulate_params=False)
    dx += c.q2.tape.input
    d_action = dx[:, feats.shape[1]:]
    d_log_prob = np.full(n, temp.alpha / n)
    actor.backward(out, d_action, d_log_prob)
    if apply:
        actor.step()
    return _finite("actor loss", loss), out.log_prob.copy()


def temp_update(temp: EntropyTemp, batch_log_probs: np.ndarray) -> float:
    """Loss -mean(log_alpha (log pi + target_entropy)); a no-op step when fixed."""
    logp = np.asarray(batch_log_probs, dtype=np.float64)
    gap = float(np.mean(logp + temp.target_entropy))
    loss = -float(temp.log_alpha[0]) * gap
    if temp.learn:
        adam_update([temp.log_alpha], [np.array([-gap])], temp.opt)
    return _finite("temperature loss", loss)
