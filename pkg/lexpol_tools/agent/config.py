"""Agent and run configuration.

Both classes are flat dataclasses whose field names are the keys of the
config file format (see ``utils.config_file``).  Every ``validate_*`` method
runs on construction; failures are collected and raised together.
"""

import dataclasses
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

from ..utils.config_file import ConfigEntry, build_dataclass, dump_dataclass, parse_config_text, read_config_file
from ..utils.errors import ConfigError
from ..utils.exception_stack import ExceptionStack

logger = logging.getLogger(__name__)

Mode = Literal["lexpol", "lexpol_frozen", "lexpol_care", "care", "mtsac_flat", "single_task"]
Provider = Literal["hashed", "table"]

OUTPUT_ROOT_ENV = "LEXPOL_OUTPUT_ROOT"

GATED_MODES = ("lexpol", "lexpol_frozen", "lexpol_care")
ENCODER_MODES = ("lexpol_care", "care")


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def resolve_expert_path(path: str, seed_index: int) -> str:
    """Fill in ``{seed_index}``; relative paths are taken under the output root."""
    resolved = Path(path.replace("{seed_index}", str(seed_index)))
    if not resolved.is_absolute():
        resolved = output_root() / resolved
    return str(resolved)


class _Validated:
    def __post_init__(self) -> None:
        stack = ExceptionStack(message=f"Invalid {type(self).__name__}")
        for name in sorted(dir(self)):
            if name.startswith("validate_"):
                stack.add(getattr(self, name), name)
        stack.join()
        stack.resolve()


@dataclasses.dataclass(frozen=True)
class AgentConfig(_Validated):
    mode: Mode

    # context encoder and gate
    k: int = 3
    n: int = 50
    stopgrad: bool = True
    provider: Provider = "hashed"
    embedding_table: Optional[str] = None
    embed_seed: int = 0
    raw_embed_dim: int = 50
    context_hidden: int = 50
    use_context_head: bool = True
    gate_hidden: Tuple[int, ...] = (50, 50)

    # state-encoder mixture
    k_enc: int = 6
    encoder_hidden: int = 50
    repr_dim: int = 50

    # networks
    hidden: Tuple[int, ...] = (400, 400, 400)
    actor_final_scale: float = 0.01
    critic_context: bool = False

    # optimisation
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    actor_betas: Tuple[float, float] = (0.9, 0.999)
    critic_betas: Tuple[float, float] = (0.9, 0.999)
    discount: float = 0.99
    tau: float = 0.005
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    init_log_alpha: float = 0.0
    learn_temperature: bool = True
    target_entropy: Optional[float] = None
    reward_scale: float = 1.0

    # replay and exploration
    batch_per_task: int = 128
    replay_capacity: int = 1_000_000
    warmup_steps: int = 1500

    expert_paths: Tuple[str, ...] = ()
    seed: int = 0

    @property
    def uses_gate(self) -> bool:
        return self.mode in GATED_MODES

    @property
    def uses_encoders(self) -> bool:
        return self.mode in ENCODER_MODES

    @property
    def num_policies(self) -> int:
        return self.k if self.uses_gate else 1

    @property
    def log_std_bounds(self) -> Tuple[float, float]:
        return (self.log_std_min, self.log_std_max)

    @property
    def frozen_groups(self) -> Tuple[str, ...]:
        return ("policies",) if self.mode == "lexpol_frozen" else ()

    def validate_sizes(self) -> None:
        for name in ("k", "n", "raw_embed_dim", "context_hidden", "k_enc", "encoder_hidden", "repr_dim", "batch_per_task"):
            if getattr(self, name) < 1:
                raise ConfigError(f"'{name}' must be at least 1, got {getattr(self, name)}")
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigError(f"'hidden' needs positive layer widths, got {self.hidden}")
        if self.gate_hidden and min(self.gate_hidden) < 1:
            raise ConfigError(f"'gate_hidden' needs positive layer widths, got {self.gate_hidden}")

    def validate_optimisation(self) -> None:
        if not 0.0 <= self.discount <= 1.0:
            raise ConfigError(f"'discount' must lie in [0, 1], got {self.discount}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"'tau' must lie in (0, 1], got {self.tau}")
        if not self.log_std_min < self.log_std_max:
            raise ConfigError("'log_std_min' must be below 'log_std_max'")
        if min(self.actor_lr, self.critic_lr) <= 0:
            raise ConfigError("learning rates must be positive")
        if self.warmup_steps < 0 or self.replay_capacity < 1:
            raise ConfigError("'warmup_steps' must be non-negative and 'replay_capacity' positive")

    def validate_provider(self) -> None:
        if self.provider == "table" and not self.embedding_table:
            raise ConfigError("provider 'table' needs 'embedding_table' to name a CSV file")

    def validate_experts(self) -> None:
        if self.mode == "lexpol_frozen" and not self.expert_paths:
            raise ConfigError("mode 'lexpol_frozen' needs 'expert_paths' to list expert checkpoints")

    def to_lines(self) -> List[str]:
        return dump_dataclass(self)


@dataclasses.dataclass(frozen=True)
class RunConfig(_Validated):
    suite: str
    budget_steps: int

    # suite parameters (ignored by suite files)
    suite_file: Optional[str] = None
    num_tasks: int = 4
    shared_layout: bool = False
    shaping: float = 0.1
    observe_phase: bool = True
    phase_metadata: bool = True
    horizon: int = 150

    eval_interval: int = 10_000
    eval_trials: int = 5
    checkpoint_interval: int = 10_000
    log_interval: int = 1_000
    keep_checkpoints: int = 2
    seeds: Tuple[int, ...] = (0,)
    output_dir: Optional[str] = None
    parallel: int = 1
    success_threshold: float = 0.9

    def validate_schedule(self) -> None:
        if self.budget_steps < 1:
            raise ConfigError(f"'budget_steps' must be positive, got {self.budget_steps}")
        for name in ("eval_interval", "eval_trials", "checkpoint_interval", "log_interval", "keep_checkpoints", "parallel", "horizon"):
            if getattr(self, name) < 1:
                raise ConfigError(f"'{name}' must be at least 1, got {getattr(self, name)}")

    def validate_seeds(self) -> None:
        if not self.seeds:
            raise ConfigError("'seeds' must list at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"'seeds' repeats values: {self.seeds}")

    def suite_params(self) -> Dict[str, Any]:
        return {
            "num_tasks": self.num_tasks,
            "shared_layout": self.shared_layout,
            "shaping": self.shaping,
            "observe_phase": self.observe_phase,
            "phase_metadata": self.phase_metadata,
            "horizon": self.horizon,
        }

    def resolved_output_dir(self, config_path: Optional[Union[str, os.PathLike]] = None) -> Path:
        if self.output_dir:
            out = Path(self.output_dir)
            if not out.is_absolute() and os.environ.get(OUTPUT_ROOT_ENV):
                return Path(os.environ[OUTPUT_ROOT_ENV]) / out
            return out
        root = output_root()
        name = Path(config_path).stem if config_path else "run"
        return root / name

    def to_lines(self) -> List[str]:
        return dump_dataclass(self)


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    agent: AgentConfig
    run: RunConfig

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, agent=dataclasses.replace(self.agent, seed=seed))

    def for_seed_index(self, seed_index: int) -> "ExperimentConfig":
        """The run of one listed seed, with its expert paths resolved."""
        exp = self.with_seed(self.run.seeds[seed_index])
        paths = tuple(resolve_expert_path(p, seed_index) for p in self.agent.expert_paths)
        return dataclasses.replace(exp, agent=dataclasses.replace(exp.agent, expert_paths=paths))

    def dump(self) -> str:
        lines = ["# agent"] + self.agent.to_lines() + ["", "# run"] + self.run.to_lines()
        return "\n".join(lines) + "\n"


def _agent_keys() -> set:
    return {f.name for f in dataclasses.fields(AgentConfig)}


def config_from_entries(entries: Mapping[str, ConfigEntry]) -> ExperimentConfig:
    """Split flat entries between the two config classes and build both.

    Errors from both halves are reported together.
    """
    agent_keys = _agent_keys()
    agent_entries = {k: e for k, e in entries.items() if k in agent_keys}
    run_entries = {k: e for k, e in entries.items() if k not in agent_keys}
    stack = ExceptionStack(message="Invalid configuration")
    stack.add(lambda: build_dataclass(AgentConfig, agent_entries), "agent settings")
    stack.add(lambda: build_dataclass(RunConfig, run_entries), "run settings")
    agent, run = stack.join()
    stack.resolve()
    return ExperimentConfig(agent, run)


def load_config(path: Union[str, os.PathLike]) -> ExperimentConfig:
    try:
        entries = read_config_file(path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return config_from_entries(entries)


def parse_config(text: str, path: str = "<string>") -> ExperimentConfig:
    return config_from_entries(parse_config_text(text, path))


def agent_config_from_meta(meta: Mapping[str, str]) -> AgentConfig:
    """Rebuild the AgentConfig stored as ``config.<key>`` checkpoint meta."""
    entries = {
        key[len("config."):]: ConfigEntry(key[len("config."):], value, "<checkpoint>", 0)
        for key, value in meta.items()
        if key.startswith("config.")
    }
    if "mode" not in entries:
        raise ConfigError("checkpoint does not record the agent configuration")
    return build_dataclass(AgentConfig, entries, strict=False)
