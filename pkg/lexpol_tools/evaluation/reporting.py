"""Report files and comparison tables.

``report/`` of a run directory holds ``series_seed_<i>.csv`` (step, mean,
one column per task), ``gates_seed_<i>.csv`` (task_id, step, alpha_0..) and
``summary.txt``.  ``compare`` reads the series of several run directories.
"""

import csv
import dataclasses
import logging
import os
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils.errors import ArgumentError, CheckpointError
from .protocol import EvalReport, EvalSnapshot, SignificanceResult, aggregate, welch_bonferroni

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

UPPER_BOUND_MODE = "single_task"

_SERIES = re.compile(r"^series_seed_(\d+)\.csv$")


def write_series_csv(path: PathLike, snapshots: Sequence[EvalSnapshot]) -> None:
    tasks = snapshots[0].task_ids if snapshots else ()
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "mean", *tasks])
        for snap in snapshots:
            writer.writerow([snap.step, repr(snap.mean_success), *(repr(v) for v in snap.per_task_success)])


def read_series_csv(path: PathLike) -> List[EvalSnapshot]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][:2] != ["step", "mean"]:
        raise CheckpointError(f"{path}: not a success series file")
    tasks = tuple(rows[0][2:])
    return [
        EvalSnapshot(int(r[0]), tuple(float(v) for v in r[2:]), float(r[1]), tasks)
        for r in rows[1:]
        if r
    ]


def gate_rows(eval_records: Iterable[Mapping[str, Any]]) -> List[List[Any]]:
    rows = []
    for rec in eval_records:
        for task_id, alpha in rec["alpha"].items():
            rows.append([task_id, rec["step"], *alpha])
    return rows


def write_gate_csv(path: PathLike, eval_records: Iterable[Mapping[str, Any]]) -> None:
    rows = gate_rows(eval_records)
    k = max((len(r) - 2 for r in rows), default=0)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["task_id", "step", *(f"alpha_{i}" for i in range(k))])
        for r in rows:
            writer.writerow([r[0], r[1], *(repr(float(v)) for v in r[2:])])


def read_gate_csv(path: PathLike) -> List[Tuple[str, int, np.ndarray]]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    return [(r[0], int(r[1]), np.array([float(v) for v in r[2:]])) for r in rows[1:] if r]


class TrajectoryWriter:
    """``record`` hook for ``evaluate`` that writes one CSV row per env step."""

    def __init__(self, path: PathLike) -> None:
        self._file = open(path, "w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._file)
        self._header = False

    def __call__(self, task_id, trial, t, state, reward, phase, alpha) -> None:
        if not self._header:
            self._writer.writerow(
                ["task_id", "trial", "step", "x", "y", "phase", "reward", *(f"alpha_{i}" for i in range(len(alpha)))]
            )
            self._header = True
        phase = getattr(phase, "value", phase) or ""
        self._writer.writerow(
            [task_id, trial, t, repr(float(state[0])), repr(float(state[1])), phase, repr(float(reward)), *(repr(float(a)) for a in alpha)]
        )

    def close(self) -> None:
        self._file.close()

    def __enter__(self) -> "TrajectoryWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_run_series(run_dir: PathLike) -> Dict[int, List[EvalSnapshot]]:
    report = Path(run_dir) / "report"
    found = {}
    if report.is_dir():
        for p in report.iterdir():
            m = _SERIES.match(p.name)
            if m:
                found[int(m.group(1))] = read_series_csv(p)
    if not found:
        raise CheckpointError(f"{run_dir}: no report/series_seed_<i>.csv files")
    return dict(sorted(found.items()))


def run_mode(run_dir: PathLike) -> Optional[str]:
    copy = Path(run_dir) / "config.copy"
    if not copy.exists():
        return None
    for line in copy.read_text(encoding="utf-8").splitlines():
        key, sep, value = line.partition("=")
        if sep and key.strip() == "mode":
            return value.split("#", 1)[0].strip()
    return None


@dataclasses.dataclass(frozen=True)
class MethodRow:
    name: str
    report: EvalReport
    upper_bound: bool = False
    starred: bool = False


def format_summary(rows: Sequence[MethodRow], threshold: float = 0.9) -> str:
    width = max([len("method")] + [len(r.name) + 2 for r in rows])
    header = f"{'method':<{width}}  {'best mean':>15}  {'final mean':>15}  {'step@' + format(threshold, 'g'):>10}  seeds"
    rule = "-" * len(header)

    def line(r: MethodRow) -> str:
        name = r.name + (" *" if r.starred else "")
        rep = r.report
        reach = str(rep.steps_to_threshold) if rep.steps_to_threshold is not None else "-"
        return (
            f"{name:<{width}}  {rep.best_mean:>7.3f} ± {rep.stderr:<5.3f}  "
            f"{rep.final_mean:>7.3f} ± {rep.final_stderr:<5.3f}  {reach:>10}  {rep.num_seeds}"
        )

    upper = [r for r in rows if r.upper_bound]
    rest = [r for r in rows if not r.upper_bound]
    out = [header, rule]
    if upper:
        out += [line(r) + "  (upper bound)" for r in upper] + [rule]
    out += [line(r) for r in rest]
    return "\n".join(out) + "\n"


def write_run_report(
    run_dir: PathLike,
    series: Mapping[int, Sequence[EvalSnapshot]],
    eval_records: Mapping[int, Sequence[Mapping[str, Any]]],
    name: str,
    threshold: float = 0.9,
) -> EvalReport:
    report_dir = Path(run_dir) / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    for i, snaps in series.items():
        write_series_csv(report_dir / f"series_seed_{i}.csv", snaps)
    for i, records in eval_records.items():
        write_gate_csv(report_dir / f"gates_seed_{i}.csv", records)
    report = aggregate(list(series.values()), threshold)
    (report_dir / "summary.txt").write_text(format_summary([MethodRow(name, report)], threshold), encoding="utf-8")
    return report


def run_labels(run_dirs: Sequence[PathLike]) -> List[str]:
    """Shortest trailing path of each run directory that tells it apart."""
    paths = [Path(d).resolve() for d in run_dirs]
    seen = set()
    for given, path in zip(run_dirs, paths):
        if path in seen:
            raise ArgumentError(f"run directory listed twice: {given}")
        seen.add(path)
    depth = 1
    while True:
        labels = ["/".join(p.parts[-depth:]) for p in paths]
        if len(set(labels)) == len(labels) or all(depth >= len(p.parts) for p in paths):
            return labels
        depth += 1


def compare(
    run_dirs: Sequence[PathLike],
    out: Optional[PathLike] = None,
    at_step: Optional[int] = None,
    num_comparisons: Optional[int] = None,
    threshold: float = 0.9,
    alpha: float = 0.05,
) -> Tuple[str, SignificanceResult]:
    """Summary table over run directories plus Welch tests against the leader.

    Rows are sorted by best mean; runs trained in ``single_task`` mode are
    listed first, apart, as the upper bound and are not tested.  The leader
    is starred when it beats the runner-up significantly.
    Each row is named by the shortest trailing part of its path that no
    other run directory shares.
    """
    if not run_dirs:
        raise ArgumentError("compare needs at least one run directory")
    rows = []
    for label, d in zip(run_labels(run_dirs), run_dirs):
        series = read_run_series(d)
        report = aggregate(list(series.values()), threshold, max_step=at_step)
        rows.append(MethodRow(label, report, upper_bound=run_mode(d) == UPPER_BOUND_MODE))
    rows.sort(key=lambda r: (not r.upper_bound, -r.report.best_mean))
    contenders = [r for r in rows if not r.upper_bound]
    pairs = []
    if len(contenders) >= 2:
        leader = contenders[0]
        n = num_comparisons or len(contenders) - 1
        for other in contenders[1:]:
            if leader.report.num_seeds < 2 or other.report.num_seeds < 2:
                logger.warning("skipping %s vs %s: Welch's test needs two seeds each", leader.name, other.name)
                continue
            pairs.extend(
                welch_bonferroni(leader.report.at_best(), other.report.at_best(), n, alpha, (leader.name, other.name)).pairs
            )
        runner_up = pairs[0] if pairs and pairs[0].method_b == contenders[1].name else None
        if runner_up is not None and runner_up.significant and runner_up.t_stat > 0:
            rows[rows.index(leader)] = dataclasses.replace(leader, starred=True)
    result = SignificanceResult(tuple(pairs))
    text = format_summary(rows, threshold)
    if pairs:
        text += "\n" + "\n".join(
            f"{p.method_a} vs {p.method_b}: t={p.t_stat:.3f} dof={p.dof:.2f} p={p.p_raw:.3g} p_adj={p.p_adjusted:.3g}"
            + (" significant" if p.significant else "")
            for p in pairs
        ) + "\n"
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text, result
