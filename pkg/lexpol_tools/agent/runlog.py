"""Append-only run log, one JSON object per line.

Record kinds::

    {"kind": "run", "seed": 0, "mode": "lexpol", "suite": "...", "tasks": [...], "budget": N}
    {"kind": "eval", "step": N, "per_task": [...], "mean": x, "alpha": {task: [...]}, "losses": {...}}
    {"kind": "end", "step": N, "gradient_steps": G, "warmup_only": false}
"""

import dataclasses
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..evaluation import EvalSnapshot
from ..utils.errors import CheckpointError


@dataclasses.dataclass
class RunLog:
    records: List[Dict[str, Any]] = dataclasses.field(default_factory=list)

    def append(self, kind: str, **fields: Any) -> Dict[str, Any]:
        record = {"kind": kind, **fields}
        self.records.append(record)
        return record

    def of_kind(self, kind: str) -> List[Dict[str, Any]]:
        return [r for r in self.records if r["kind"] == kind]

    @property
    def header(self) -> Optional[Dict[str, Any]]:
        runs = self.of_kind("run")
        return runs[0] if runs else None

    @property
    def end(self) -> Optional[Dict[str, Any]]:
        ends = self.of_kind("end")
        return ends[-1] if ends else None

    def snapshots(self) -> List[EvalSnapshot]:
        tasks = tuple(self.header["tasks"]) if self.header else ()
        return [
            EvalSnapshot(r["step"], tuple(r["per_task"]), r["mean"], tasks)
            for r in self.of_kind("eval")
        ]

    def truncate(self, step: int) -> "RunLog":
        """Records up to and including ``step``; the end record is dropped."""
        return RunLog([r for r in self.records if r["kind"] == "run" or (r["kind"] == "eval" and r["step"] <= step)])

    def dumps(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def write(self, path: Union[str, os.PathLike]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(self.dumps(), encoding="utf-8")
        tmp.replace(path)

    @classmethod
    def read(cls, path: Union[str, os.PathLike]) -> "RunLog":
        records = []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise CheckpointError(f"{path}:{lineno}: unreadable run log record: {e.msg}") from None
        return cls(records)
