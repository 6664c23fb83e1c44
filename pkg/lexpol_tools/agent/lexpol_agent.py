"""Actor, critics and temperature of one run, with checkpointing."""

import logging
import os
from pathlib import Path
from typing import Dict, Mapping, Optional, Union

import numpy as np

from ..context import EmbeddingTable
from ..nn import DenseNet, param_hash, read_checkpoint, write_checkpoint
from ..sac import Batch, EntropyTemp, ReplayBuffer, TwinCritics, actor_update, critic_update, polyak, temp_update
from ..utils.errors import CheckpointError, ConfigError, ShapeError
from ..utils.rng import RandomStreams
from .actor import CompositeActor
from .config import AgentConfig, agent_config_from_meta

logger = logging.getLogger(__name__)

STATE_FILE = "state.npz"


def load_embedding_table(cfg: AgentConfig) -> Optional[EmbeddingTable]:
    if cfg.provider != "table":
        return None
    try:
        return EmbeddingTable.read_csv(cfg.embedding_table)
    except FileNotFoundError:
        raise ConfigError(f"embedding table not found: {cfg.embedding_table}") from None


class LexpolAgent:
    def __init__(self, cfg: AgentConfig, actor: CompositeActor, critics: TwinCritics, temp: EntropyTemp) -> None:
        self.cfg = cfg
        self.actor = actor
        self.critics = critics
        self.temp = temp

    @classmethod
    def build(
        cls,
        cfg: AgentConfig,
        state_dim: int,
        action_dim: int,
        streams: Optional[RandomStreams] = None,
        load_expert_weights: bool = True,
    ) -> "LexpolAgent":
        streams = streams or RandomStreams(cfg.seed)
        actor = CompositeActor.build(
            cfg, state_dim, action_dim, streams, load_embedding_table(cfg), load_expert_weights
        )
        critics = TwinCritics.build(
            actor.critic_input_dim,
            action_dim,
            cfg.hidden,
            streams["critic"],
            tau=cfg.tau,
            lr=cfg.critic_lr,
            betas=cfg.critic_betas,
        )
        temp = EntropyTemp.build(
            action_dim,
            init_log_alpha=cfg.init_log_alpha,
            target_entropy=cfg.target_entropy,
            learn=cfg.learn_temperature,
            lr=cfg.actor_lr,
            betas=cfg.actor_betas,
        )
        return cls(cfg, actor, critics, temp)

    @property
    def state_dim(self) -> int:
        return self.actor.state_dim

    @property
    def action_dim(self) -> int:
        return self.actor.action_dim

    def act(self, s_raw, meta, mode="stochastic", rng=None):
        return self.actor.act(s_raw, meta, mode, rng)

    def networks(self) -> Dict[str, DenseNet]:
        return {**self.actor.networks(), **self.critics.networks()}

    def update(self, batch: Batch, rng: np.random.Generator) -> Dict[str, float]:
        """One SAC gradient step on a batch whose metadata is filled in."""
        critic_loss = critic_update(self.critics, batch, self.actor, self.temp, self.cfg.discount, rng)
        actor_loss, log_probs = actor_update(self.actor, self.critics, batch, self.temp, rng)
        temp_loss = temp_update(self.temp, log_probs)
        polyak(self.critics)
        return {
            "critic": critic_loss,
            "actor": actor_loss,
            "temperature": temp_loss,
            "alpha": self.temp.alpha,
            "entropy": float(-np.mean(log_probs)),
        }

    def group_hashes(self) -> Dict[str, str]:
        """Parameter hash per actor group (empty groups omitted)."""
        return {g: param_hash(*nets.values()) for g, nets in self.actor.groups().items() if nets}

    def save(self, directory: Union[str, os.PathLike], meta: Optional[Mapping[str, object]] = None) -> Path:
        info = {f"config.{line.split(' = ', 1)[0]}": line.split(" = ", 1)[1] for line in self.cfg.to_lines()}
        info.update(
            {"state_dim": self.state_dim, "action_dim": self.action_dim, "k": self.actor.k}
        )
        info.update(meta or {})
        return write_checkpoint(directory, self.networks(), {"log_alpha": self.temp.log_alpha}, info)

    @classmethod
    def load(cls, directory: Union[str, os.PathLike]) -> "LexpolAgent":
        """Rebuild an agent from a checkpoint's own config and fragments."""
        ckpt = read_checkpoint(directory)
        cfg = agent_config_from_meta(ckpt.meta)
        try:
            state_dim, action_dim = int(ckpt.meta["state_dim"]), int(ckpt.meta["action_dim"])
        except KeyError:
            raise CheckpointError(f"{directory}: checkpoint does not record its dimensions") from None
        agent = cls.build(cfg, state_dim, action_dim, load_expert_weights=False)
        for name, net in agent.networks().items():
            stored = ckpt.net(name)
            if stored.dims != net.dims:
                raise ConfigError(f"{directory}: fragment '{name}' has dims {stored.dims}, config builds {net.dims}")
            net.copy_from(stored)
        if "log_alpha" in ckpt.arrays:
            agent.temp.log_alpha[...] = ckpt.arrays["log_alpha"].astype(np.float64).reshape(agent.temp.log_alpha.shape)
        return agent

    def state_arrays(self) -> Dict[str, np.ndarray]:
        """Exact (float64) parameters and optimiser moments, for resuming."""
        arrays: Dict[str, np.ndarray] = {"temp/log_alpha": self.temp.log_alpha}
        optimizers = {**self.actor.optimizers, "q1": self.critics.opt1, "q2": self.critics.opt2, "temp": self.temp.opt}
        for name, net in self.networks().items():
            for i, p in enumerate(net.parameters()):
                arrays[f"net/{name}/{i}"] = p
        for name, opt in optimizers.items():
            for i, a in enumerate(opt.arrays()):
                arrays[f"adam/{name}/{i}"] = a
            arrays[f"adam/{name}/step"] = np.array(opt.step)
        return arrays

    def load_state_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        optimizers = {**self.actor.optimizers, "q1": self.critics.opt1, "q2": self.critics.opt2, "temp": self.temp.opt}

        def put(target: np.ndarray, key: str) -> None:
            if key not in arrays:
                raise CheckpointError(f"resume state lacks '{key}'")
            if arrays[key].shape != target.shape:
                raise ShapeError(f"resume state '{key}' has shape {arrays[key].shape}, expected {target.shape}")
            target[...] = arrays[key]

        put(self.temp.log_alpha, "temp/log_alpha")
        for name, net in self.networks().items():
            for i, p in enumerate(net.parameters()):
                put(p, f"net/{name}/{i}")
        for name, opt in optimizers.items():
            for i, a in enumerate(opt.arrays()):
                put(a, f"adam/{name}/{i}")
            step_key = f"adam/{name}/step"
            if step_key not in arrays:
                raise CheckpointError(f"resume state lacks '{step_key}'")
            opt.step = int(arrays[step_key])


def save_resume_state(directory: Path, agent: LexpolAgent, replay: ReplayBuffer) -> None:
    arrays = dict(agent.state_arrays())
    arrays.update({f"replay/{k}": v for k, v in replay.state_dict().items()})
    np.savez(directory / STATE_FILE, **arrays)


def load_resume_state(directory: Path, agent: LexpolAgent, replay: ReplayBuffer) -> None:
    path = directory / STATE_FILE
    if not path.exists():
        raise CheckpointError(f"checkpoint {directory} has no resume state")
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    agent.load_state_arrays(arrays)
    try:
        replay.load_state_dict({k[len("replay/"):]: v for k, v in arrays.items() if k.startswith("replay/")})
    except KeyError as e:
        raise CheckpointError(f"resume state in {directory} lacks replay field {e}") from e
