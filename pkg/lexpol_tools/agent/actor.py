"""The composite actor: k Gaussian heads blended by a context gate.

Every agent mode is one configuration of ``CompositeActor``:

============== ===== ===== ========================= ==========
mode           k     gate  state fed to the heads     frozen
============== ===== ===== ========================= ==========
mtsac_flat     1     no    raw state                 -
single_task    1     no    raw state                 -
lexpol         k     yes   raw state                 -
lexpol_frozen  k     yes   raw state                 policies
lexpol_care    k     yes   encoder-mixture state     -
care           1     no    encoder-mixture state     -
============== ===== ===== ========================= ==========

Parameter groups (for freezing and optimisers) are ``policies``, ``gate``,
``context``, ``encoders``, ``encoder_gate`` and ``encoder_context``.
"""

import dataclasses
import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..context import ContextEncoder, EmbeddingTable, TaskMetadata
from ..mixture import (
    EncoderMixture,
    EncoderMixtureOutput,
    GateWeights,
    blend_actions,
    blend_actions_backward,
    blend_log_prob,
    blend_log_prob_backward,
    gate,
    gate_backward,
)
from ..nn import AdamState, DenseNet, adam_step, mlp, read_checkpoint
from ..sac import ActionSample, GaussianPolicyHead
from ..utils.errors import ConfigError, ShapeError, TaskLookupError
from ..utils.rng import RandomStreams
from .config import AgentConfig

logger = logging.getLogger(__name__)

GROUPS = ("policies", "gate", "context", "encoders", "encoder_gate", "encoder_context")

_POLICY = re.compile(r"^policy\.(\d+)$")


@dataclasses.dataclass
class ActorOutput:
    action: np.ndarray
    log_prob: np.ndarray
    alpha: np.ndarray
    samples: List[ActionSample]
    state: np.ndarray
    weights: Optional[GateWeights] = None
    encoder: Optional[EncoderMixtureOutput] = None


class CompositeActor:
    """Args:
    policies: the k sub-policy heads, all reading the same state
    gate_net: context -> k logits; required when k > 1
    context: encoder for the policy gate
    encoders: optional state-encoder mixture in front of the heads
    frozen: parameter groups excluded from optimisation
    critic_context: feed the context vector to the critics as well
    """

    def __init__(
        self,
        policies: Sequence[GaussianPolicyHead],
        gate_net: Optional[DenseNet] = None,
        context: Optional[ContextEncoder] = None,
        encoders: Optional[EncoderMixture] = None,
        frozen: Sequence[str] = (),
        critic_context: bool = False,
        lr: float = 3e-4,
        betas: Tuple[float, float] = (0.9, 0.999),
    ) -> None:
        if not policies:
            raise ShapeError("a composite actor needs at least one sub-policy")
        if len({(p.state_dim, p.action_dim) for p in policies}) != 1:
            raise ShapeError("sub-policies disagree on state or action dimensions")
        if gate_net is None and len(policies) > 1:
            raise ShapeError(f"{len(policies)} sub-policies need a gate")
        if gate_net is not None:
            if context is None:
                raise ShapeError("a gate needs a context encoder")
            if gate_net.out_dim != len(policies) or gate_net.in_dim != context.n:
                raise ShapeError(
                    f"gate maps {gate_net.in_dim} -> {gate_net.out_dim}, expected {context.n} -> {len(policies)}"
                )
        if encoders is not None and encoders.repr_dim != policies[0].state_dim:
            raise ShapeError(f"encoders produce {encoders.repr_dim} features, policies read {policies[0].state_dim}")
        unknown = set(frozen) - set(GROUPS)
        if unknown:
            raise ConfigError(f"unknown parameter groups: {sorted(unknown)}")
        if critic_context and context is None:
            raise ConfigError("critic_context needs a context encoder")
        self.policies = list(policies)
        self.gate_net = gate_net
        self.context = context
        self.encoders = encoders
        self.frozen = frozenset(frozen)
        self.critic_context = critic_context
        self.optimizers: Dict[str, AdamState] = {
            name: AdamState.for_net(net, lr=lr, beta1=betas[0], beta2=betas[1])
            for name, net in self.networks().items()
        }

    @classmethod
    def build(
        cls,
        cfg: AgentConfig,
        state_dim: int,
        action_dim: int,
        streams: RandomStreams,
        table: Optional[EmbeddingTable] = None,
        load_expert_weights: bool = True,
    ) -> "CompositeActor":
        def context_encoder(stream: str) -> ContextEncoder:
            return ContextEncoder.build(
                streams[stream],
                provider=cfg.provider,
                n=cfg.n,
                hidden=cfg.context_hidden,
                raw_dim=cfg.raw_embed_dim,
                seed=cfg.embed_seed,
                table=table,
                use_head=cfg.use_context_head,
                stopgrad=cfg.stopgrad,
            )

        context = gate_net = encoders = None
        if cfg.uses_gate or cfg.critic_context:
            context = context_encoder("context")
        if cfg.uses_gate:
            gate_net = mlp(context.n, cfg.gate_hidden, cfg.num_policies, streams["gate"])
        policy_in = state_dim
        if cfg.uses_encoders:
            # separate heads whenever either could be trained
            shared = context is not None and not context.trainable
            enc_context = context if shared else context_encoder("encoder_context")
            encoders = EncoderMixture.build(
                cfg.k_enc,
                state_dim,
                cfg.repr_dim,
                [cfg.encoder_hidden],
                cfg.gate_hidden,
                enc_context,
                streams["encoder"],
                streams["encoder_gate"],
            )
            policy_in = cfg.repr_dim
        policies = [
            GaussianPolicyHead.build(
                policy_in, action_dim, cfg.hidden, streams["policy"], cfg.log_std_bounds, cfg.actor_final_scale
            )
            for _ in range(cfg.num_policies)
        ]
        if cfg.mode == "lexpol_frozen" and load_expert_weights:
            experts = load_experts(cfg.expert_paths)
            if len(experts) != cfg.num_policies:
                raise ConfigError(f"expert checkpoints hold {len(experts)} policies, config asks for k={cfg.num_policies}")
            for slot, expert in zip(policies, experts):
                if slot.trunk.dims != expert.trunk.dims:
                    raise ConfigError(f"expert dims {expert.trunk.dims} do not match the configured {slot.trunk.dims}")
            policies = experts
        return cls(
            policies,
            gate_net,
            context,
            encoders,
            frozen=cfg.frozen_groups,
            critic_context=cfg.critic_context,
            lr=cfg.actor_lr,
            betas=cfg.actor_betas,
        )

    @property
    def k(self) -> int:
        return len(self.policies)

    @property
    def state_dim(self) -> int:
        return self.encoders.encoders[0].in_dim if self.encoders is not None else self.policies[0].state_dim

    @property
    def action_dim(self) -> int:
        return self.policies[0].action_dim

    @property
    def shares_context(self) -> bool:
        return self.encoders is not None and self.encoders.context is self.context

    def groups(self) -> Dict[str, Dict[str, DenseNet]]:
        groups: Dict[str, Dict[str, DenseNet]] = {g: {} for g in GROUPS}
        groups["policies"] = {f"policy.{i}": p.trunk for i, p in enumerate(self.policies)}
        if self.gate_net is not None:
            groups["gate"] = {"gate": self.gate_net}
        if self.context is not None:
            groups["context"] = {f"context.{k}": v for k, v in self.context.networks().items()}
        if self.encoders is not None:
            nets = self.encoders.networks()
            groups["encoders"] = {k: v for k, v in nets.items() if k.startswith("encoder.")}
            groups["encoder_gate"] = {"encoder_gate": nets["encoder_gate"]}
            if not self.shares_context:
                groups["encoder_context"] = {
                    f"encoder_context.{k}": v for k, v in self.encoders.context.networks().items()
                }
        return groups

    def networks(self) -> Dict[str, DenseNet]:
        return {name: net for group in self.groups().values() for name, net in group.items()}

    def trains(self, group: str) -> bool:
        if group in self.frozen:
            return False
        if group == "context":
            return self.context is not None and self.context.trainable
        if group == "encoder_context":
            return self.encoders is not None and not self.shares_context and self.encoders.context.trainable
        return True

    def sample(
        self,
        states: np.ndarray,
        metas: Sequence[TaskMetadata],
        rng: Optional[np.random.Generator],
        deterministic: bool = False,
        cache: bool = True,
    ) -> ActorOutput:
        states = np.asarray(states, dtype=np.float64)
        z = None
        if self.gate_net is not None:
            z = self.context.encode(metas, cache=cache)
        s, enc_out = states, None
        if self.encoders is not None:
            z_enc = z if self.shares_context and z is not None else self.encoders.context.encode(metas, cache=cache)
            enc_out = self.encoders.forward(states, z_enc, cache=cache)
            s = enc_out.state
        samples = [p.sample(s, rng, deterministic=deterministic, cache=cache) for p in self.policies]
        weights = None
        if self.gate_net is not None:
            weights = gate(self.gate_net, z, cache=cache)
            alpha = weights.alpha
        else:
            alpha = np.ones((states.shape[0], 1))
        acts = np.stack([smp.action for smp in samples], axis=1)
        lps = np.stack([smp.log_prob for smp in samples], axis=1)
        return ActorOutput(
            action=blend_actions(acts, alpha),
            log_prob=blend_log_prob(lps, alpha),
            alpha=alpha,
            samples=samples,
            state=s,
            weights=weights,
            encoder=enc_out,
        )

    def backward(self, out: ActorOutput, d_action: np.ndarray, d_log_prob: np.ndarray) -> None:
        """Route dL/d(action) and dL/d(log-prob) into every trainable group.

        Frozen sub-policies still pass gradient through to the encoders but
        accumulate nothing themselves.
        """
        acts = np.stack([smp.action for smp in out.samples], axis=1)
        lps = np.stack([smp.log_prob for smp in out.samples], axis=1)
        d_acts, d_alpha = blend_actions_backward(acts, out.alpha, d_action)
        d_lps, d_alpha_lp = blend_log_prob_backward(lps, out.alpha, d_log_prob)
        train_policies = self.trains("policies")
        need_state_grad = self.encoders is not None and any(
            self.trains(g) for g in ("encoders", "encoder_gate", "encoder_context")
        )
        ds = None
        for i, (policy, smp) in enumerate(zip(self.policies, out.samples)):
            if not (train_policies or need_state_grad):
                break
            g = policy.backward(smp, d_acts[:, i], d_lps[:, i], accumulate_params=train_policies)
            ds = g.copy() if ds is None else ds + g
        if self.gate_net is not None and (self.trains("gate") or self.trains("context")):
            dz = gate_backward(self.gate_net, out.weights, d_alpha + d_alpha_lp, accumulate_params=self.trains("gate"))
            if self.trains("context"):
                self.context.backward(dz)
        if need_state_grad:
            self.encoders.backward(out.encoder, ds, train_encoders=self.trains("encoders"))

    def step(self) -> None:
        """One Adam step on every trainable group; frozen tapes are cleared."""
        for group, nets in self.groups().items():
            for name, net in nets.items():
                if self.trains(group):
                    adam_step(net, net.tape, self.optimizers[name])
                else:
                    net.zero_grad()

    def zero_grad(self) -> None:
        for net in self.networks().values():
            net.zero_grad()

    def critic_state(self, states: np.ndarray, metas: Sequence[TaskMetadata]) -> np.ndarray:
        if not self.critic_context:
            return states
        return np.concatenate([states, self.context.encode(metas, cache=False)], axis=-1)

    @property
    def critic_input_dim(self) -> int:
        return self.state_dim + (self.context.n if self.critic_context else 0)

    def act(
        self,
        s_raw: np.ndarray,
        meta: Optional[TaskMetadata],
        mode: str = "stochastic",
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[np.ndarray, float, GateWeights]:
        """Single-state action.

        ``mode`` is ``stochastic``, ``deterministic``, or ``hard``: the
        deterministic action of the arg-max sub-policy alone, used only for
        dominance analysis.
        """
        if meta is None and (self.gate_net is not None or self.encoders is not None):
            raise TaskLookupError("this actor needs task metadata to act")
        s = np.asarray(s_raw, dtype=np.float64)[None, :]
        out = self.sample(s, [meta], rng, deterministic=mode != "stochastic", cache=False)
        weights = GateWeights(out.alpha[0], out.weights.logits[0] if out.weights is not None else np.zeros(1))
        if mode == "hard":
            j = int(np.argmax(out.alpha[0]))
            return out.samples[j].action[0], float(out.samples[j].log_prob[0]), weights
        return out.action[0], float(out.log_prob[0]), weights

    def gate_weights(self, metas: Sequence[TaskMetadata]) -> np.ndarray:
        """(B, k) gate weights; a column of ones for ungated actors."""
        if self.gate_net is None:
            return np.ones((len(metas), 1))
        return gate(self.gate_net, self.context.encode(metas, cache=False), cache=False).alpha


def _policy_index(name: str) -> int:
    return int(_POLICY.match(name).group(1))


def load_experts(paths: Sequence[str], log_std_bounds: Optional[Tuple[float, float]] = None) -> List[GaussianPolicyHead]:
    """Every ``policy.<i>`` fragment of each checkpoint, in path then index order."""
    heads = []
    for path in paths:
        ckpt = read_checkpoint(Path(path))
        names = sorted((n for n in ckpt.nets if _POLICY.match(n)), key=_policy_index)
        if not names:
            raise ConfigError(f"{path}: checkpoint holds no policy fragments")
        bounds = log_std_bounds
        if bounds is None and "config.log_std_min" in ckpt.meta:
            bounds = (float(ckpt.meta["config.log_std_min"]), float(ckpt.meta["config.log_std_max"]))
        for name in names:
            heads.append(GaussianPolicyHead(ckpt.nets[name], bounds or (-20.0, 2.0)))
        logger.info("loaded %d expert policies from %s", len(names), path)
    return heads
