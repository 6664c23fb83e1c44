"""Environment boundary and suite containers.

``TaskEnv`` is the whole contract an agent relies on: reset, step, the
current task metadata, and a binary success flag reported when an episode
ends.  An adapter for an external benchmark only has to implement it.
"""

import dataclasses
from abc import ABC, abstractmethod
from typing import Any, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..context import TaskMetadata
from ..utils.errors import ConfigError, NumericError, ShapeError, TaskLookupError
from ..utils.parameterized_class_factory import ParameterizedClassFactory


@dataclasses.dataclass(frozen=True)
class StepResult:
    state: np.ndarray
    reward: float
    done: bool
    success: bool
    timeout: bool = False

    @property
    def terminal(self) -> bool:
        """Done for bootstrapping purposes; running out of time is not."""
        return self.done and not self.timeout


class TaskEnv(ABC):
    state_dim: int
    action_dim: int
    horizon: int

    @abstractmethod
    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        ...

    @abstractmethod
    def step(self, action: np.ndarray) -> StepResult:
        ...

    @abstractmethod
    def metadata(self) -> TaskMetadata:
        """Metadata for the agent's current situation in this task."""

    @abstractmethod
    def observe(self) -> np.ndarray:
        ...

    @abstractmethod
    def get_state(self) -> Dict[str, Any]:
        """JSON-serializable snapshot of the episode in progress."""

    @abstractmethod
    def set_state(self, state: Mapping[str, Any]) -> None:
        ...

    def _check_action(self, action: np.ndarray) -> np.ndarray:
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape != (self.action_dim,):
            raise ShapeError(f"expected a {self.action_dim}-dimensional action, got {action.shape}")
        if not np.all(np.isfinite(action)):
            raise NumericError(f"action contains non-finite values: {action}")
        return np.clip(action, -1.0, 1.0)


@dataclasses.dataclass(frozen=True)
class TaskSpec:
    task_id: str
    text: str
    context: Hashable

    @property
    def metadata(self) -> TaskMetadata:
        return TaskMetadata(self.task_id, self.text)


@dataclasses.dataclass(frozen=True)
class TaskSuite:
    """Tasks sharing one state and action space, each with its own context."""

    name: str
    tasks: Tuple[TaskSpec, ...]
    family: ParameterizedClassFactory
    state_dim: int
    action_dim: int
    env_kwargs: Tuple[Tuple[str, Any], ...] = ()

    def __post_init__(self) -> None:
        if not self.tasks:
            raise ConfigError(f"suite '{self.name}' has no tasks")
        ids = [t.task_id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"suite '{self.name}' repeats task ids: {ids}")

    @property
    def task_ids(self) -> List[str]:
        return [t.task_id for t in self.tasks]

    def __len__(self) -> int:
        return len(self.tasks)

    def task(self, task_id: str) -> TaskSpec:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise TaskLookupError(f"suite '{self.name}' has no task '{task_id}'")

    def make_env(self, task: TaskSpec) -> TaskEnv:
        env = self.family[task.context](task_id=task.task_id, text=task.text, **dict(self.env_kwargs))
        if (env.state_dim, env.action_dim) != (self.state_dim, self.action_dim):
            raise ShapeError(
                f"task '{task.task_id}' has dims {(env.state_dim, env.action_dim)}, suite declares {(self.state_dim, self.action_dim)}"
            )
        return env

    def subset(self, task_ids: Sequence[str]) -> "TaskSuite":
        return dataclasses.replace(self, name=f"{self.name}[{','.join(task_ids)}]", tasks=tuple(self.task(t) for t in task_ids))
