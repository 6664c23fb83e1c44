"""Which sub-policy the gate prefers, cell by cell over the T-maze."""

import csv
import dataclasses
import logging
import os
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np

from ..context import TaskMetadata
from ..envs import CompositeTask, Phase, TaskSuite, TMazeContext, TMazeEnv, TMazeGeometry, metadata_for_phase
from ..utils.errors import ArgumentError, ConfigError

logger = logging.getLogger(__name__)

MapPhase = Literal["seek_red", "seek_blue", "static"]


@dataclasses.dataclass
class DominanceMap:
    res: int
    phase: str
    metadata: TaskMetadata
    x: np.ndarray
    y: np.ndarray
    argmax_idx: np.ndarray
    max_alpha: np.ndarray

    def fraction(self, index: int) -> float:
        """Share of cells in which sub-policy ``index`` dominates."""
        return float(np.mean(self.argmax_idx == index)) if self.argmax_idx.size else 0.0

    def write_csv(self, path: Union[str, os.PathLike]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            f.write(f"# res={self.res} phase={self.phase} task_id={self.metadata.task_id} text={self.metadata.text}\n")
            writer = csv.writer(f)
            writer.writerow(["x", "y", "argmax_idx", "max_alpha"])
            for row in zip(self.x, self.y, self.argmax_idx, self.max_alpha):
                writer.writerow([repr(float(row[0])), repr(float(row[1])), int(row[2]), repr(float(row[3]))])

    @classmethod
    def read_csv(cls, path: Union[str, os.PathLike]) -> "DominanceMap":
        with open(path, newline="", encoding="utf-8") as f:
            first = f.readline()
            if not first.startswith("# "):
                raise ConfigError(f"{path}: missing dominance map header")
            fields = dict(tok.split("=", 1) for tok in first[2:].split(" text=")[0].split())
            text = first.split(" text=", 1)[1].rstrip("\n")
            rows = list(csv.reader(f))[1:]
        cols = np.array([[float(v) for v in r] for r in rows if r]).reshape(-1, 4)
        return cls(
            int(fields["res"]),
            fields["phase"],
            TaskMetadata(fields["task_id"], text),
            cols[:, 0],
            cols[:, 1],
            cols[:, 2].astype(np.int64),
            cols[:, 3],
        )


def _composite_context(suite: TaskSuite) -> TMazeContext:
    if suite.family is not TMazeEnv:
        raise ConfigError(f"dominance maps need a T-maze suite, got '{suite.name}'")
    for t in suite.tasks:
        if t.context.goal == "composite":
            return t.context
    return TMazeContext("composite")


def grid_cells(res: int, geometry: TMazeGeometry = TMazeGeometry()) -> np.ndarray:
    """Centres of a res x res grid over the T's bounding box, inside the T."""
    if res < 1:
        raise ArgumentError(f"grid resolution must be positive, got {res}")
    x0, x1 = geometry.crossbar.x0, geometry.crossbar.x1
    y0, y1 = geometry.stem.y0, geometry.crossbar.y1
    xs = x0 + (np.arange(res) + 0.5) * (x1 - x0) / res
    ys = y0 + (np.arange(res) + 0.5) * (y1 - y0) / res
    cells = np.array([(x, y) for y in ys for x in xs])
    return cells[[geometry.contains(c) for c in cells]]


def emit_dominance_map(
    actor,
    suite: TaskSuite,
    res: int = 40,
    phase: MapPhase = "seek_red",
    out: Optional[Union[str, os.PathLike]] = None,
) -> DominanceMap:
    """Gate weights at every cell of the T under the phase's metadata.

    ``actor`` is a CompositeActor (or anything with ``gate_net``, ``k`` and
    ``gate_weights``).
    """
    if getattr(actor, "gate_net", None) is None:
        raise TypeError("this checkpoint has no gate to map")
    if actor.k < 2:
        raise ArgumentError("a dominance map needs at least two sub-policies")
    context = _composite_context(suite)
    if phase == "static":
        context = dataclasses.replace(context, phase_metadata=False)
    task = CompositeTask(context)
    task.phase = Phase.SEEK_BLUE if phase == "seek_blue" else Phase.SEEK_RED
    meta = metadata_for_phase(task)
    cells = grid_cells(res)
    alpha = actor.gate_weights([meta] * len(cells))
    dmap = DominanceMap(
        res, phase, meta, cells[:, 0], cells[:, 1], np.argmax(alpha, axis=-1), np.max(alpha, axis=-1)
    )
    logger.info(
        "dominance map (%s, %s): shares %s",
        phase,
        meta.text,
        [round(dmap.fraction(i), 3) for i in range(actor.k)],
    )
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        dmap.write_csv(out)
    return dmap
