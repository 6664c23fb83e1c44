"""Continuous T-shaped maze with a blue goal on the left and a red goal on the right.

The T is the union of a crossbar and a stem::

    y=1.4  +---------------------------+
           | (B)                   (R) |
    y=1.0  +----------+-----+----------+
                      |     |
                      |     |
    y=0.0             +-----+
          x=-1      -0.2   0.2         x=1

State is (x, y, phase bit).  The phase bit is set once the red goal has been
reached in the composite task (when ``observe_phase``), and is always 0 in
the atomic tasks.
"""

import dataclasses
import enum
import logging
from typing import Any, Dict, Literal, Mapping, Optional, Tuple

import numpy as np

from ..context import TaskMetadata
from ..utils.errors import ConfigError
from ..utils.parameterized_class_factory import ParameterizedClassFactory
from .base import StepResult, TaskEnv

logger = logging.getLogger(__name__)

RED_TEXT = "go to the red goal"
BLUE_TEXT = "go to the blue goal"
COMPOSITE_TEXT = "go to the red goal, then the blue goal"


@dataclasses.dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, p: np.ndarray, eps: float = 1e-12) -> bool:
        return self.x0 - eps <= p[0] <= self.x1 + eps and self.y0 - eps <= p[1] <= self.y1 + eps

    def clip(self, p: np.ndarray) -> np.ndarray:
        return np.array([np.clip(p[0], self.x0, self.x1), np.clip(p[1], self.y0, self.y1)])


@dataclasses.dataclass(frozen=True)
class TMazeGeometry:
    crossbar: Rect = Rect(-1.0, 1.0, 1.0, 1.4)
    stem: Rect = Rect(-0.2, 0.2, 0.0, 1.0)
    blue_goal: Tuple[float, float] = (-0.9, 1.2)
    red_goal: Tuple[float, float] = (0.9, 1.2)
    goal_radius: float = 0.1
    step_size: float = 0.05

    def contains(self, p: np.ndarray) -> bool:
        return self.crossbar.contains(p) or self.stem.contains(p)

    def project(self, p: np.ndarray) -> np.ndarray:
        """Nearest point of the T to ``p`` (identity inside)."""
        if self.contains(p):
            return np.asarray(p, dtype=np.float64)
        a, b = self.crossbar.clip(p), self.stem.clip(p)
        return a if np.sum((a - p) ** 2) <= np.sum((b - p) ** 2) else b

    def sample_uniform(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform over the T's area, excluding both goal discs."""
        rects = (self.crossbar, self.stem)
        areas = np.array([r.area for r in rects])
        while True:
            r = rects[rng.choice(2, p=areas / areas.sum())]
            p = np.array([rng.uniform(r.x0, r.x1), rng.uniform(r.y0, r.y1)])
            if not (self.in_goal(p, "red") or self.in_goal(p, "blue")):
                return p

    def goal(self, color: str) -> np.ndarray:
        return np.array(self.red_goal if color == "red" else self.blue_goal)

    def distance(self, p: np.ndarray, color: str) -> float:
        return float(np.linalg.norm(p - self.goal(color)))

    def in_goal(self, p: np.ndarray, color: str) -> bool:
        return self.distance(p, color) <= self.goal_radius


class Phase(str, enum.Enum):
    SEEK_RED = "seek_red"
    SEEK_BLUE = "seek_blue"
    DONE_OK = "done_ok"
    DONE_FAIL = "done_fail"


@dataclasses.dataclass(frozen=True)
class TMazeContext:
    """Reward parameters of one T-maze task.

    ``goal`` is ``red`` or ``blue`` for the atomic tasks and ``composite``
    for red-then-blue.  ``shaping`` scales the dense -distance term; 0 gives
    sparse rewards.
    """

    goal: Literal["red", "blue", "composite"]
    shaping: float = 0.1
    bonus: float = 1.0
    r_red: float = 1.0
    r_blue: float = 1.0
    wrong_order_penalty: float = -1.0
    timeout_penalty: float = -0.5
    observe_phase: bool = True
    phase_metadata: bool = True

    def __post_init__(self) -> None:
        if self.goal not in ("red", "blue", "composite"):
            raise ConfigError(f"unknown T-maze goal {self.goal!r}")
        if self.shaping < 0:
            raise ConfigError("shaping coefficient must be non-negative")


class CompositeTask:
    """Red-then-blue phase machine."""

    def __init__(self, context: TMazeContext) -> None:
        self.context = context
        self.phase = Phase.SEEK_RED

    @property
    def finished(self) -> bool:
        return self.phase in (Phase.DONE_OK, Phase.DONE_FAIL)

    def advance(self, in_red: bool, in_blue: bool, shaping_term: float) -> float:
        """Apply one step's goal contacts; returns the reward."""
        c = self.context
        if self.phase is Phase.SEEK_RED:
            if in_red:
                self.phase = Phase.SEEK_BLUE
                return c.r_red
            if in_blue:
                self.phase = Phase.DONE_FAIL
                return c.wrong_order_penalty
        elif self.phase is Phase.SEEK_BLUE and in_blue:
            self.phase = Phase.DONE_OK
            return c.r_blue
        return shaping_term


def metadata_for_phase(task: CompositeTask, task_id: str = "red_then_blue") -> TaskMetadata:
    """Atomic-task metadata matching the current phase.

    The returned metadata carries the atomic task's id (``red``/``blue``), so
    table lookups and context heads see exactly what they saw for the atomic
    tasks.  With ``phase_metadata`` off the static composite text is used
    throughout.
    """
    if not task.context.phase_metadata:
        return TaskMetadata(task_id, COMPOSITE_TEXT)
    if task.phase is Phase.SEEK_RED:
        return TaskMetadata("red", RED_TEXT)
    return TaskMetadata("blue", BLUE_TEXT)


class _TMazeEnv(TaskEnv):
    """One task of the T-maze family."""

    state_dim = 3
    action_dim = 2

    def __init__(
        self,
        context: TMazeContext,
        task_id: str,
        text: str,
        horizon: int = 150,
        geometry: TMazeGeometry = TMazeGeometry(),
    ) -> None:
        self.context = context
        self.task_id = task_id
        self.text = text
        self.horizon = horizon
        self.geometry = geometry
        self.position = np.zeros(2)
        self.steps = 0
        self.done = True
        self.succeeded = False
        self.composite = CompositeTask(context) if context.goal == "composite" else None

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        self.position = self.geometry.sample_uniform(np.random.default_rng(seed))
        self.steps = 0
        self.done = False
        self.succeeded = False
        if self.composite is not None:
            self.composite.phase = Phase.SEEK_RED
        return self.observe()

    def place(self, x: float, y: float) -> np.ndarray:
        """Start an episode at a chosen point (scripted checks, dominance maps)."""
        self.reset(0)
        self.position = self.geometry.project(np.array([x, y], dtype=np.float64))
        return self.observe()

    @property
    def phase(self) -> Optional[Phase]:
        return self.composite.phase if self.composite is not None else None

    def phase_bit(self) -> float:
        if self.composite is None or not self.context.observe_phase:
            return 0.0
        return 0.0 if self.composite.phase is Phase.SEEK_RED else 1.0

    def observe(self) -> np.ndarray:
        return np.array([self.position[0], self.position[1], self.phase_bit()])

    def metadata(self) -> TaskMetadata:
        if self.composite is not None:
            return metadata_for_phase(self.composite, self.task_id)
        return TaskMetadata(self.task_id, self.text)

    def step(self, action: np.ndarray) -> StepResult:
        action = self._check_action(action)
        g, c = self.geometry, self.context
        self.position = g.project(self.position + action * g.step_size)
        self.steps += 1
        in_red, in_blue = g.in_goal(self.position, "red"), g.in_goal(self.position, "blue")
        if self.composite is None:
            reward = -c.shaping * g.distance(self.position, c.goal)
            self.succeeded = in_red if c.goal == "red" else in_blue
            if self.succeeded:
                reward += c.bonus
            done = self.succeeded
        else:
            seeking = "red" if self.composite.phase is Phase.SEEK_RED else "blue"
            reward = self.composite.advance(in_red, in_blue, -c.shaping * g.distance(self.position, seeking))
            self.succeeded = self.composite.phase is Phase.DONE_OK
            done = self.composite.finished
        timeout = not done and self.steps >= self.horizon
        if timeout and self.composite is not None:
            reward += c.timeout_penalty
            self.composite.phase = Phase.DONE_FAIL
        self.done = done or timeout
        return StepResult(self.observe(), float(reward), self.done, self.succeeded and self.done, timeout)

    def get_state(self) -> Dict[str, Any]:
        return {
            "position": [float(v) for v in self.position],
            "steps": self.steps,
            "done": self.done,
            "succeeded": self.succeeded,
            "phase": self.phase.value if self.phase is not None else None,
        }

    def set_state(self, state: Mapping[str, Any]) -> None:
        self.position = np.array(state["position"], dtype=np.float64)
        self.steps = int(state["steps"])
        self.done = bool(state["done"])
        self.succeeded = bool(state["succeeded"])
        if self.composite is not None:
            self.composite.phase = Phase(state["phase"])


TMazeEnv = ParameterizedClassFactory(_TMazeEnv, TMazeContext, "TMazeEnv", default_param_inst=ConfigError)
