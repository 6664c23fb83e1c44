"""Success-rate evaluation, seed aggregation and significance tests.

A snapshot runs a fixed number of deterministic episodes per task and
records the binary end-of-episode success flag.  Snapshots from several
seeds are averaged pointwise; the headline number is the best point of that
averaged series, with the standard error across seeds at the same point.
"""

import dataclasses
import itertools
import logging
from typing import Callable, Dict, List, Mapping, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy import stats

from ..envs import TaskSuite
from ..utils.errors import ArgumentError, ConfigError

logger = logging.getLogger(__name__)


class Agent(Protocol):
    state_dim: int
    action_dim: int

    def act(self, s_raw, meta, mode="stochastic", rng=None): ...


@dataclasses.dataclass(frozen=True)
class EvalSnapshot:
    step: int
    per_task_success: Tuple[float, ...]
    mean_success: float
    task_ids: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if any(not 0.0 <= v <= 1.0 for v in self.per_task_success):
            raise ArgumentError(f"success rates must lie in [0, 1]: {self.per_task_success}")


def snapshot_from_outcomes(
    step: int, outcomes: Mapping[str, Sequence[bool]]
) -> EvalSnapshot:
    """Aggregate per-task lists of binary outcomes."""
    if not outcomes:
        raise ArgumentError("no evaluation outcomes")
    per_task = tuple(float(np.mean(np.asarray(v, dtype=np.float64))) for v in outcomes.values())
    return EvalSnapshot(step, per_task, float(np.mean(per_task)), tuple(outcomes))


TrajectoryHook = Callable[[str, int, int, np.ndarray, float, object, np.ndarray], None]


def evaluate(
    agent: Agent,
    suite: TaskSuite,
    trials: int = 5,
    rng: Optional[np.random.Generator] = None,
    step: int = 0,
    record: Optional[TrajectoryHook] = None,
) -> EvalSnapshot:
    """Run ``trials`` deterministic episodes per task.

    Episode start seeds come from ``rng``, so two calls with generators in the
    same state see the same episodes.  ``record`` is called once per env step
    as ``record(task_id, trial, t, state, reward, phase, alpha)``.
    """
    if (agent.state_dim, agent.action_dim) != (suite.state_dim, suite.action_dim):
        raise ConfigError(
            f"agent acts on (state {agent.state_dim}, action {agent.action_dim}), "
            f"suite '{suite.name}' has (state {suite.state_dim}, action {suite.action_dim})"
        )
    rng = rng if rng is not None else np.random.default_rng(0)
    outcomes: Dict[str, List[bool]] = {}
    for task in suite.tasks:
        env = suite.make_env(task)
        results = []
        for trial in range(trials):
            s = env.reset(seed=int(rng.integers(2**31)))
            for t in range(env.horizon):
                a, _, weights = agent.act(s, env.metadata(), "deterministic")
                res = env.step(a)
                if record is not None:
                    record(task.task_id, trial, t, res.state, res.reward, getattr(env, "phase", None), weights.alpha)
                s = res.state
                if res.done:
                    break
            results.append(bool(res.success))
        outcomes[task.task_id] = results
    snap = snapshot_from_outcomes(step, outcomes)
    logger.info("step %d: mean success %.3f %s", step, snap.mean_success, dict(zip(snap.task_ids, snap.per_task_success)))
    return snap


@dataclasses.dataclass(frozen=True)
class EvalReport:
    steps: Tuple[int, ...]
    per_seed: Tuple[Tuple[float, ...], ...]
    seed_mean: Tuple[float, ...]
    best_mean: float
    best_step: int
    best_index: int
    stderr: float
    final_mean: float
    final_stderr: float
    steps_to_threshold: Optional[int] = None

    @property
    def num_seeds(self) -> int:
        return len(self.per_seed)

    def at_best(self) -> np.ndarray:
        """Per-seed values at the best interval."""
        return np.array([s[self.best_index] for s in self.per_seed])

    def at_final(self) -> np.ndarray:
        return np.array([s[-1] for s in self.per_seed])


def _stderr(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))


def aggregate(
    series: Sequence[Sequence[EvalSnapshot]],
    threshold: float = 0.9,
    max_step: Optional[int] = None,
) -> EvalReport:
    """Seed-mean series, its maximum, and the stderr across seeds there.

    ``max_step`` drops evaluation points after that step first.
    """
    if not series:
        raise ArgumentError("aggregate needs at least one seed")
    if max_step is not None:
        series = [[snap for snap in s if snap.step <= max_step] for s in series]
    steps = [tuple(snap.step for snap in s) for s in series]
    if any(st != steps[0] for st in steps):
        raise ArgumentError("evaluation intervals differ between seeds")
    if not steps[0]:
        raise ArgumentError("no evaluation points to aggregate")
    values = np.array([[snap.mean_success for snap in s] for s in series])
    mean = values.mean(axis=0)
    best = int(np.argmax(mean))
    reached = np.flatnonzero(mean >= threshold)
    return EvalReport(
        steps=steps[0],
        per_seed=tuple(tuple(float(v) for v in row) for row in values),
        seed_mean=tuple(float(v) for v in mean),
        best_mean=float(mean[best]),
        best_step=steps[0][best],
        best_index=best,
        stderr=_stderr(values[:, best]),
        final_mean=float(mean[-1]),
        final_stderr=_stderr(values[:, -1]),
        steps_to_threshold=int(steps[0][reached[0]]) if reached.size else None,
    )


@dataclasses.dataclass(frozen=True)
class PairComparison:
    method_a: str
    method_b: str
    t_stat: float
    dof: float
    p_raw: float
    p_adjusted: float
    significant: bool


@dataclasses.dataclass(frozen=True)
class SignificanceResult:
    pairs: Tuple[PairComparison, ...]

    def get(self, a: str, b: str) -> Optional[PairComparison]:
        for p in self.pairs:
            if (p.method_a, p.method_b) in ((a, b), (b, a)):
                return p
        return None


def welch_t(a: np.ndarray, b: np.ndarray) -> Tuple[float, float]:
    """Welch t statistic and Welch-Satterthwaite degrees of freedom."""
    va, vb = np.var(a, ddof=1) / len(a), np.var(b, ddof=1) / len(b)
    se2 = va + vb
    diff = float(np.mean(a) - np.mean(b))
    if se2 == 0.0:
        # degenerate variance: equal means carry no evidence, unequal ones are certain
        return (0.0 if diff == 0.0 else float(np.copysign(np.inf, diff))), float(len(a) + len(b) - 2)
    dof = se2 * se2 / (va * va / (len(a) - 1) + vb * vb / (len(b) - 1))
    return diff / float(np.sqrt(se2)), float(dof)


def welch_bonferroni(
    samples_a: Sequence[float],
    samples_b: Sequence[float],
    num_comparisons: int = 1,
    alpha: float = 0.05,
    names: Tuple[str, str] = ("a", "b"),
) -> SignificanceResult:
    a, b = np.asarray(samples_a, dtype=np.float64), np.asarray(samples_b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ArgumentError("Welch's test needs at least two samples per group")
    if num_comparisons < 1:
        raise ArgumentError(f"number of comparisons must be positive, got {num_comparisons}")
    t, dof = welch_t(a, b)
    if t == 0.0:
        p = 1.0
    elif np.isinf(t):
        p = 0.0
    else:
        p = float(2.0 * stats.t.sf(abs(t), dof))
    p_adj = min(1.0, p * num_comparisons)
    return SignificanceResult(
        (PairComparison(names[0], names[1], t, dof, p, p_adj, p_adj < alpha),)
    )


def pairwise_welch(
    samples: Mapping[str, Sequence[float]],
    num_comparisons: Optional[int] = None,
    alpha: float = 0.05,
) -> SignificanceResult:
    """All pairs among the named sample sets, Bonferroni-corrected together."""
    pairs = list(itertools.combinations(samples, 2))
    n = num_comparisons or len(pairs)
    results = []
    for a, b in pairs:
        results.extend(welch_bonferroni(samples[a], samples[b], n, alpha, (a, b)).pairs)
    return SignificanceResult(tuple(results))
