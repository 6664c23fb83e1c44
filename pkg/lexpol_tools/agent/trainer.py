"""Multi-task SAC training loop shared by every agent mode.

Tasks are interleaved one environment step at a time (step ``t`` acts in
task ``t mod T``).  The first ``warmup_steps`` actions are uniform random;
after that every environment step is followed by exactly one gradient step
on a batch stratified over tasks.

Checkpoint directory ``ckpt/seed_<i>/step_<n>/``::

    manifest.txt, params.bin   float32 fragments (readable by eval/map)
    state.npz                  exact parameters, optimiser moments, replay
    rng.json                   state of every random stream
    progress.json              counters, env episodes, metadata registry

``progress.json`` is written last and marks the checkpoint complete.
Once a checkpoint is complete, only the newest ``keep_checkpoints`` are kept.
"""

import dataclasses
import json
import logging
import os
import re
import shutil
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..context import TaskMetadata
from ..envs import TaskSuite
from ..evaluation import evaluate
from ..sac import Batch, ReplayBuffer, Transition
from ..utils.errors import CheckpointError, NumericError
from ..utils.rng import RandomStreams
from .config import AgentConfig, RunConfig
from .lexpol_agent import LexpolAgent, load_resume_state, save_resume_state
from .runlog import RunLog

logger = logging.getLogger(__name__)

PROGRESS = "progress.json"
RNG_STATE = "rng.json"
NAN_DUMP = "nan_dump.npz"

_STEP_DIR = re.compile(r"^step_(\d+)$")


@dataclasses.dataclass(frozen=True)
class Schedule:
    eval_interval: int = 10_000
    eval_trials: int = 5
    checkpoint_interval: int = 10_000
    log_interval: int = 1_000
    keep_checkpoints: int = 2

    @classmethod
    def from_run(cls, run: RunConfig) -> "Schedule":
        return cls(run.eval_interval, run.eval_trials, run.checkpoint_interval, run.log_interval, run.keep_checkpoints)


class MetadataRegistry:
    """Small integer ids for the metadata seen so far, stored in replay."""

    def __init__(self, items: Sequence[TaskMetadata] = ()) -> None:
        self.items: List[TaskMetadata] = []
        self._ids: Dict[TaskMetadata, int] = {}
        for meta in items:
            self.id(meta)

    def id(self, meta: TaskMetadata) -> int:
        if meta not in self._ids:
            self._ids[meta] = len(self.items)
            self.items.append(meta)
        return self._ids[meta]

    def lookup(self, ids: np.ndarray) -> List[TaskMetadata]:
        return [self.items[i] for i in np.asarray(ids).tolist()]

    def to_json(self) -> List[List[str]]:
        return [[m.task_id, m.text] for m in self.items]

    @classmethod
    def from_json(cls, rows: Sequence[Sequence[str]]) -> "MetadataRegistry":
        return cls([TaskMetadata(task_id, text) for task_id, text in rows])


def latest_checkpoint(ckpt_root: Path, max_step: Optional[int] = None) -> Optional[Path]:
    """Newest complete ``step_<n>`` directory, optionally at or before ``max_step``."""
    if not ckpt_root.is_dir():
        return None
    found = []
    for d in ckpt_root.iterdir():
        m = _STEP_DIR.match(d.name)
        if m and (d / PROGRESS).exists() and (max_step is None or int(m.group(1)) <= max_step):
            found.append((int(m.group(1)), d))
    return max(found)[1] if found else None


class Trainer:
    """One seed of one configuration.

    Args:
        cfg: agent configuration; ``cfg.seed`` seeds every random stream
        suite: tasks to interleave
        budget_steps: total environment steps across all tasks
        schedule: evaluation, checkpoint and logging intervals
        ckpt_root: where ``step_<n>`` directories go (no checkpoints if None)
        log_path: run log file, rewritten at every checkpoint and at the end
    """

    def __init__(
        self,
        cfg: AgentConfig,
        suite: TaskSuite,
        budget_steps: int,
        schedule: Schedule = Schedule(),
        ckpt_root: Optional[Path] = None,
        log_path: Optional[Path] = None,
        dump_dir: Optional[Path] = None,
    ) -> None:
        self.cfg = cfg
        self.suite = suite
        self.budget = budget_steps
        self.schedule = schedule
        self.ckpt_root = ckpt_root
        self.log_path = log_path
        self.dump_dir = dump_dir
        self.streams = RandomStreams(cfg.seed)
        self.agent = LexpolAgent.build(cfg, suite.state_dim, suite.action_dim, self.streams)
        self.replay = ReplayBuffer(
            len(suite), suite.state_dim, suite.action_dim, cfg.replay_capacity, cfg.batch_per_task
        )
        self.registry = MetadataRegistry()
        self.envs = [suite.make_env(t) for t in suite.tasks]
        self.states: List[np.ndarray] = []
        self.step = 0
        self.gradient_steps = 0
        self.losses: Dict[str, float] = {}
        self.log = RunLog()

    def _episode_seed(self) -> int:
        return int(self.streams["env"].integers(2**31))

    def _start(self) -> None:
        self.states = [env.reset(seed=self._episode_seed()) for env in self.envs]
        self.log.append(
            "run",
            seed=self.cfg.seed,
            mode=self.cfg.mode,
            suite=self.suite.name,
            tasks=self.suite.task_ids,
            budget=self.budget,
        )

    def act(self, task_index: int) -> np.ndarray:
        if self.step < self.cfg.warmup_steps:
            return self.streams["explore"].uniform(-1.0, 1.0, size=self.suite.action_dim)
        env = self.envs[task_index]
        a, _, _ = self.agent.act(self.states[task_index], env.metadata(), "stochastic", self.streams["noise"])
        return a

    def env_step(self) -> None:
        i = self.step % len(self.envs)
        env, s = self.envs[i], self.states[i]
        ctx = self.registry.id(env.metadata())
        a = self.act(i)
        res = env.step(a)
        self.replay.add(
            Transition(i, s, a, self.cfg.reward_scale * res.reward, res.state, res.terminal, ctx, self.registry.id(env.metadata()))
        )
        self.states[i] = env.reset(seed=self._episode_seed()) if res.done else res.state
        self.step += 1

    def sample_batch(self) -> Batch:
        batch = self.replay.sample(self.streams["replay"])
        batch.meta = self.registry.lookup(batch.ctx)
        batch.meta_next = self.registry.lookup(batch.ctx_next)
        return batch

    def update(self) -> None:
        batch = self.sample_batch()
        try:
            self.losses = self.agent.update(batch, self.streams["noise"])
        except NumericError as e:
            path = self._dump_nan(batch)
            logger.error("non-finite values at step %d, diagnostic dump written to %s", self.step, path)
            e.add_note(f"diagnostic dump: {path}")
            raise
        self.gradient_steps += 1

    def _dump_nan(self, batch: Batch) -> Path:
        directory = self.dump_dir or Path.cwd()
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / NAN_DUMP
        np.savez(
            path,
            step=np.array(self.step),
            task=batch.task,
            s=batch.s,
            a=batch.a,
            r=batch.r,
            s_next=batch.s_next,
            done=batch.done,
            last_losses=np.array([self.losses.get(k, np.nan) for k in ("critic", "actor", "temperature")]),
        )
        return path

    def gate_snapshot(self) -> Dict[str, List[float]]:
        metas = self.registry.items or [t.metadata for t in self.suite.tasks]
        alpha = self.agent.actor.gate_weights(metas)
        return {m.task_id: [float(v) for v in row] for m, row in zip(metas, alpha)}

    def run_eval(self) -> None:
        snap = evaluate(
            self.agent, self.suite, self.schedule.eval_trials, self.streams["eval"], step=self.step
        )
        self.log.append(
            "eval",
            step=self.step,
            per_task=list(snap.per_task_success),
            mean=snap.mean_success,
            alpha=self.gate_snapshot(),
            losses=dict(self.losses),
        )

    def checkpoint(self) -> Optional[Path]:
        if self.ckpt_root is None:
            return None
        directory = self.ckpt_root / f"step_{self.step}"
        self.agent.save(directory, {"step": self.step, "suite": self.suite.name})
        save_resume_state(directory, self.agent, self.replay)
        (directory / RNG_STATE).write_text(json.dumps(self.streams.get_state()), encoding="utf-8")
        progress = {
            "step": self.step,
            "gradient_steps": self.gradient_steps,
            "losses": self.losses,
            "registry": self.registry.to_json(),
            "envs": [env.get_state() for env in self.envs],
        }
        (directory / PROGRESS).write_text(json.dumps(progress), encoding="utf-8")
        if self.log_path is not None:
            self.log.write(self.log_path)
        logger.info("checkpoint at step %d: %s", self.step, directory)
        self.prune_checkpoints()
        return directory

    def prune_checkpoints(self) -> None:
        complete = sorted(
            (int(m.group(1)), d)
            for d in self.ckpt_root.iterdir()
            if (m := _STEP_DIR.match(d.name)) and (d / PROGRESS).exists()
        )
        for _, d in complete[: -self.schedule.keep_checkpoints]:
            logger.debug("removing checkpoint %s", d)
            shutil.rmtree(d)

    def restore(self, directory: Path) -> None:
        try:
            progress = json.loads((directory / PROGRESS).read_text(encoding="utf-8"))
            rng_state = json.loads((directory / RNG_STATE).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise CheckpointError(f"cannot resume from {directory}: {e}") from e
        load_resume_state(directory, self.agent, self.replay)
        self.streams.set_state(rng_state)
        self.step = progress["step"]
        self.gradient_steps = progress["gradient_steps"]
        self.losses = progress["losses"]
        self.registry = MetadataRegistry.from_json(progress["registry"])
        for env, state in zip(self.envs, progress["envs"]):
            env.set_state(state)
        self.states = [env.observe() for env in self.envs]
        if self.log_path is not None and self.log_path.exists():
            self.log = RunLog.read(self.log_path).truncate(self.step)
        logger.info("resumed from step %d (%s)", self.step, directory)

    def run(self, resume: bool = True, stop_at: Optional[int] = None) -> RunLog:
        """Train to the budget; ``stop_at`` halts early as if the process died."""
        found = latest_checkpoint(self.ckpt_root) if resume and self.ckpt_root is not None else None
        if found is not None:
            self.restore(found)
        else:
            self._start()
        sched = self.schedule
        while self.step < self.budget:
            self.env_step()
            if self.step > self.cfg.warmup_steps:
                self.update()
            if self.step % sched.log_interval == 0 and self.losses:
                logger.debug("step %d losses %s", self.step, self.losses)
            if self.step % sched.eval_interval == 0 or self.step == self.budget:
                self.run_eval()
            if self.step % sched.checkpoint_interval == 0 or self.step == self.budget:
                self.checkpoint()
            if stop_at is not None and self.step >= stop_at:
                logger.warning("stopping at step %d before the budget of %d", self.step, self.budget)
                return self.log
        self.log.append(
            "end",
            step=self.step,
            gradient_steps=self.gradient_steps,
            warmup_only=self.gradient_steps == 0,
        )
        if self.log_path is not None:
            self.log.write(self.log_path)
        return self.log


def merge_single_task_logs(suite: TaskSuite, logs: Sequence[RunLog], cfg: AgentConfig, budget: int) -> RunLog:
    """One run log for a set of per-task runs, shaped like a multi-task log."""
    merged = RunLog()
    merged.append("run", seed=cfg.seed, mode=cfg.mode, suite=suite.name, tasks=suite.task_ids, budget=budget)
    evals = [log.of_kind("eval") for log in logs]
    for records in zip(*evals):
        if len({r["step"] for r in records}) != 1:
            raise CheckpointError("per-task runs evaluated at different steps")
        per_task = [r["per_task"][0] for r in records]
        keys = sorted(set().union(*(r["losses"] for r in records)))
        merged.append(
            "eval",
            step=records[0]["step"],
            per_task=per_task,
            mean=float(np.mean(per_task)),
            alpha={tid: [1.0] for tid in suite.task_ids},
            losses={k: float(np.mean([r["losses"][k] for r in records if k in r["losses"]])) for k in keys},
        )
    ends = [log.end for log in logs]
    if all(ends):
        merged.append(
            "end",
            step=ends[0]["step"],
            gradient_steps=sum(e["gradient_steps"] for e in ends),
            warmup_only=all(e["warmup_only"] for e in ends),
        )
    return merged


def train(
    cfg: AgentConfig,
    suite: TaskSuite,
    budget_steps: int,
    schedule: Schedule = Schedule(),
    output_dir: Optional[Union[str, os.PathLike]] = None,
    seed_index: int = 0,
    resume: bool = True,
    stop_at: Optional[int] = None,
) -> RunLog:
    """Train one seed and return its run log.

    With ``output_dir`` the run writes ``logs/seed_<i>.log`` and
    ``ckpt/seed_<i>/`` below it and resumes from the newest checkpoint there.
    ``single_task`` trains one flat agent per task on its own budget and
    also saves each final agent under ``experts/seed_<i>/<task_id>/``.
    """
    out = Path(output_dir) if output_dir is not None else None
    log_path = out / "logs" / f"seed_{seed_index}.log" if out else None
    ckpt_root = out / "ckpt" / f"seed_{seed_index}" if out else None
    if cfg.mode != "single_task":
        return Trainer(cfg, suite, budget_steps, schedule, ckpt_root, log_path, out).run(resume, stop_at)
    logs = []
    for task_id in suite.task_ids:
        sub = Trainer(
            cfg,
            suite.subset([task_id]),
            budget_steps,
            schedule,
            ckpt_root / f"task_{task_id}" if out else None,
            out / "logs" / f"seed_{seed_index}.task_{task_id}.log" if out else None,
            out,
        )
        logs.append(sub.run(resume, stop_at))
        if out is not None and sub.step >= budget_steps:
            sub.agent.save(out / "experts" / f"seed_{seed_index}" / task_id, {"task_id": task_id})
    merged = merge_single_task_logs(suite, logs, cfg, budget_steps)
    if log_path is not None:
        merged.write(log_path)
    return merged


def mtsac_flat_baseline(
    cfg: AgentConfig, suite: TaskSuite, budget_steps: int, **kwargs: Any
) -> RunLog:
    """Flat multi-task SAC: one actor over the shared state, no task context."""
    return train(dataclasses.replace(cfg, mode="mtsac_flat"), suite, budget_steps, **kwargs)
