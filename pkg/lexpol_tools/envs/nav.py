"""Point-goal navigation with K coloured goal slots.

Every task sees the same observation layout, ``(agent x, y, slot_0 x, y, ...,
slot_{K-1} x, y)``, but which slot is the goal depends on the task.  Without
the task's context the slots are indistinguishable distractors.
"""

import dataclasses
import logging
from typing import Any, Dict, Mapping, Optional

import numpy as np

from ..context import TaskMetadata
from ..utils.errors import ConfigError
from ..utils.parameterized_class_factory import ParameterizedClassFactory
from .base import StepResult, TaskEnv

logger = logging.getLogger(__name__)

COLORS = ("red", "blue", "green", "yellow", "purple", "orange", "cyan", "magenta", "white", "black")


def slot_color(i: int) -> str:
    return COLORS[i] if i < len(COLORS) else f"number {i}"


@dataclasses.dataclass(frozen=True)
class NavContext:
    goal_slot: int
    num_slots: int
    shaping: float = 0.1
    bonus: float = 1.0

    def __post_init__(self) -> None:
        if self.num_slots < 2:
            raise ConfigError(f"navigation tasks need at least 2 goal slots, got {self.num_slots}")
        if not 0 <= self.goal_slot < self.num_slots:
            raise ConfigError(f"goal slot {self.goal_slot} outside 0..{self.num_slots - 1}")
        if self.shaping < 0:
            raise ConfigError("shaping coefficient must be non-negative")


class _NavEnv(TaskEnv):
    """Reach the goal slot of this task's context inside [-1, 1]^2."""

    action_dim = 2
    arena = 1.0
    slot_extent = 0.9
    min_separation = 0.3
    goal_radius = 0.1
    step_size = 0.05

    def __init__(self, context: NavContext, task_id: str, text: str, horizon: int = 150) -> None:
        self.context = context
        self.task_id = task_id
        self.text = text
        self.horizon = horizon
        self.state_dim = 2 + 2 * context.num_slots
        self.position = np.zeros(2)
        self.slots = np.zeros((context.num_slots, 2))
        self.steps = 0
        self.done = True
        self.succeeded = False

    def _layout(self, rng: np.random.Generator) -> np.ndarray:
        for _ in range(1000):
            slots = rng.uniform(-self.slot_extent, self.slot_extent, size=(self.context.num_slots, 2))
            gaps = np.linalg.norm(slots[:, None] - slots[None, :], axis=-1)
            if np.all(gaps[np.triu_indices(len(slots), 1)] >= self.min_separation):
                return slots
        raise ConfigError(f"cannot place {self.context.num_slots} slots {self.min_separation} apart")

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self.slots = self._layout(rng)
        while True:
            p = rng.uniform(-self.arena, self.arena, size=2)
            if np.min(np.linalg.norm(self.slots - p, axis=-1)) > self.goal_radius:
                break
        self.position = p
        self.steps = 0
        self.done = False
        self.succeeded = False
        return self.observe()

    @property
    def goal(self) -> np.ndarray:
        return self.slots[self.context.goal_slot]

    def observe(self) -> np.ndarray:
        return np.concatenate([self.position, self.slots.reshape(-1)])

    def metadata(self) -> TaskMetadata:
        return TaskMetadata(self.task_id, self.text)

    def step(self, action: np.ndarray) -> StepResult:
        action = self._check_action(action)
        c = self.context
        self.position = np.clip(self.position + action * self.step_size, -self.arena, self.arena)
        self.steps += 1
        dist = float(np.linalg.norm(self.position - self.goal))
        self.succeeded = dist <= self.goal_radius
        reward = -c.shaping * dist + (c.bonus if self.succeeded else 0.0)
        timeout = not self.succeeded and self.steps >= self.horizon
        self.done = self.succeeded or timeout
        return StepResult(self.observe(), float(reward), self.done, self.succeeded, timeout)

    def get_state(self) -> Dict[str, Any]:
        return {
            "position": [float(v) for v in self.position],
            "slots": [[float(v) for v in row] for row in self.slots],
            "steps": self.steps,
            "done": self.done,
            "succeeded": self.succeeded,
        }

    def set_state(self, state: Mapping[str, Any]) -> None:
        self.position = np.array(state["position"], dtype=np.float64)
        self.slots = np.array(state["slots"], dtype=np.float64)
        self.steps = int(state["steps"])
        self.done = bool(state["done"])
        self.succeeded = bool(state["succeeded"])


NavEnv = ParameterizedClassFactory(_NavEnv, NavContext, "NavEnv", default_param_inst=ConfigError)
