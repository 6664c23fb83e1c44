"""Task-stratified replay.

Each task owns a ring of ``capacity // num_tasks`` slots.  Sampling draws a
fixed share of the batch from every task that has data, so every batch mixes
all tasks; with uniform weights the share is ``batch_per_task``.
"""

import dataclasses
import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..utils.errors import ArgumentError, ShapeError

logger = logging.getLogger(__name__)

_FIELDS = ("s", "a", "r", "s_next", "done", "ctx", "ctx_next")


@dataclasses.dataclass
class Transition:
    task: int
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool
    ctx: int = 0
    ctx_next: int = 0


@dataclasses.dataclass
class Batch:
    """A sampled batch; ``meta``/``meta_next`` are filled in by the trainer."""

    task: np.ndarray
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray
    ctx: np.ndarray
    ctx_next: np.ndarray
    meta: Optional[List[Any]] = None
    meta_next: Optional[List[Any]] = None

    def __len__(self) -> int:
        return self.r.shape[0]


class ReplayBuffer:
    def __init__(
        self,
        num_tasks: int,
        state_dim: int,
        action_dim: int,
        capacity: int = 1_000_000,
        batch_per_task: int = 128,
        task_weights: Optional[Sequence[float]] = None,
    ) -> None:
        if num_tasks < 1 or capacity < num_tasks:
            raise ArgumentError(f"capacity {capacity} cannot hold {num_tasks} tasks")
        self.num_tasks = num_tasks
        self.capacity = capacity
        self.per_task_capacity = capacity // num_tasks
        self.batch_per_task = batch_per_task
        weights = np.ones(num_tasks) if task_weights is None else np.asarray(task_weights, dtype=np.float64)
        if weights.shape != (num_tasks,) or np.any(weights < 0) or weights.sum() <= 0:
            raise ArgumentError("task weights must be non-negative, one per task, and not all zero")
        self.task_weights = weights / weights.sum()
        n = self.per_task_capacity
        self.s = np.zeros((num_tasks, n, state_dim))
        self.a = np.zeros((num_tasks, n, action_dim))
        self.r = np.zeros((num_tasks, n))
        self.s_next = np.zeros((num_tasks, n, state_dim))
        self.done = np.zeros((num_tasks, n), dtype=bool)
        self.ctx = np.zeros((num_tasks, n), dtype=np.int64)
        self.ctx_next = np.zeros((num_tasks, n), dtype=np.int64)
        self.sizes = np.zeros(num_tasks, dtype=np.int64)
        self.heads = np.zeros(num_tasks, dtype=np.int64)

    @property
    def batch_size(self) -> int:
        return self.batch_per_task * self.num_tasks

    def __len__(self) -> int:
        return int(self.sizes.sum())

    def add(self, t: Transition) -> None:
        if not 0 <= t.task < self.num_tasks:
            raise ArgumentError(f"task index {t.task} outside 0..{self.num_tasks - 1}")
        if np.shape(t.s) != self.s.shape[2:] or np.shape(t.a) != self.a.shape[2:]:
            raise ShapeError(f"transition shapes {np.shape(t.s)}, {np.shape(t.a)} do not fit the buffer")
        i, pos = t.task, self.heads[t.task]
        self.s[i, pos] = t.s
        self.a[i, pos] = t.a
        self.r[i, pos] = t.r
        self.s_next[i, pos] = t.s_next
        self.done[i, pos] = t.done
        self.ctx[i, pos] = t.ctx
        self.ctx_next[i, pos] = t.ctx_next
        self.heads[i] = (pos + 1) % self.per_task_capacity
        self.sizes[i] = min(self.sizes[i] + 1, self.per_task_capacity)

    def task_counts(self) -> np.ndarray:
        """Samples per task for one batch, following the task weights."""
        counts = np.floor(self.task_weights * self.batch_size).astype(np.int64)
        # hand out the rounding remainder to the heaviest tasks
        for i in np.argsort(-self.task_weights, kind="stable")[: self.batch_size - counts.sum()]:
            counts[i] += 1
        return counts

    def sample(self, rng: np.random.Generator) -> Batch:
        if len(self) == 0:
            raise ArgumentError("cannot sample from an empty replay buffer")
        tasks, rows = [], []
        for i, count in enumerate(self.task_counts()):
            if count == 0 or self.sizes[i] == 0:
                continue
            tasks.append(np.full(count, i))
            rows.append(rng.integers(0, self.sizes[i], size=count))
        task, row = np.concatenate(tasks), np.concatenate(rows)
        return Batch(
            task=task,
            s=self.s[task, row],
            a=self.a[task, row],
            r=self.r[task, row],
            s_next=self.s_next[task, row],
            done=self.done[task, row],
            ctx=self.ctx[task, row],
            ctx_next=self.ctx_next[task, row],
        )

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Filled rows only, task after task, with the ring positions."""
        state = {
            name: np.concatenate([getattr(self, name)[i, :n] for i, n in enumerate(self.sizes)])
            for name in _FIELDS
        }
        state["sizes"] = self.sizes.copy()
        state["heads"] = self.heads.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        sizes = np.asarray(state["sizes"], dtype=np.int64)
        heads = np.asarray(state["heads"], dtype=np.int64)
        if sizes.shape != self.sizes.shape or heads.shape != self.heads.shape:
            raise ShapeError(f"replay state holds {sizes.shape[0]} tasks, expected {self.num_tasks}")
        if np.any(sizes < 0) or np.any(sizes > self.per_task_capacity) or np.any(heads >= self.per_task_capacity):
            raise ShapeError(f"replay state does not fit {self.per_task_capacity} slots per task")
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        for name in _FIELDS:
            stored, current = np.asarray(state[name]), getattr(self, name)
            if stored.shape != (bounds[-1],) + current.shape[2:]:
                raise ShapeError(
                    f"replay field {name}: stored {stored.shape}, expected {(bounds[-1],) + current.shape[2:]}"
                )
            current[...] = 0
            for i, n in enumerate(sizes):
                current[i, :n] = stored[bounds[i] : bounds[i + 1]]
        self.sizes[...] = sizes
        self.heads[...] = heads
