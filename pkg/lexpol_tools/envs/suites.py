"""Named task suites and the suite definition file.

Suite file format::

    suite <name> family=<tmaze|nav> [horizon=150]
    # task_id <TAB> metadata text <TAB> context fields as key=value
    red	go to the red goal	goal=red shaping=0.1
    blue	go to the blue goal	goal=blue shaping=0.1
"""

import dataclasses
import logging
import os
import typing
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Union

from ..utils.config_file import coerce_value, format_value
from ..utils.errors import ConfigError
from ..utils.exception_stack import ExceptionStack
from .base import TaskSpec, TaskSuite
from .nav import NavContext, NavEnv, slot_color
from .tmaze import BLUE_TEXT, COMPOSITE_TEXT, RED_TEXT, TMazeContext, TMazeEnv

logger = logging.getLogger(__name__)

FAMILIES = {"tmaze": (TMazeEnv, TMazeContext), "nav": (NavEnv, NavContext)}


def _param(params: Mapping[str, Any], key: str, default: Any) -> Any:
    return params[key] if key in params else default


def tmaze_pair(params: Mapping[str, Any]) -> TaskSuite:
    shaping = float(_param(params, "shaping", 0.1))
    tasks = (
        TaskSpec("blue", BLUE_TEXT, TMazeContext("blue", shaping=shaping)),
        TaskSpec("red", RED_TEXT, TMazeContext("red", shaping=shaping)),
    )
    return TaskSuite(
        "tmaze_pair",
        tasks,
        TMazeEnv,
        state_dim=3,
        action_dim=2,
        env_kwargs=(("horizon", int(_param(params, "horizon", 150))),),
    )


def tmaze_composite(params: Mapping[str, Any]) -> TaskSuite:
    context = TMazeContext(
        "composite",
        shaping=float(_param(params, "shaping", 0.1)),
        observe_phase=bool(_param(params, "observe_phase", True)),
        phase_metadata=bool(_param(params, "phase_metadata", True)),
    )
    return TaskSuite(
        "tmaze_composite",
        (TaskSpec("red_then_blue", COMPOSITE_TEXT, context),),
        TMazeEnv,
        state_dim=3,
        action_dim=2,
        env_kwargs=(("horizon", int(_param(params, "horizon", 150))),),
    )


def nav_k_tasks(params: Mapping[str, Any]) -> TaskSuite:
    """K point-goal tasks; task i's goal sits in observation slot i.

    With ``shared_layout`` every task targets slot 0 (a negative control where
    the context carries no information); the tasks then differ only in their
    shaping scale.
    """
    k = int(_param(params, "num_tasks", 4))
    shaping = float(_param(params, "shaping", 0.1))
    shared = bool(_param(params, "shared_layout", False))
    if k < 2:
        raise ConfigError(f"nav_k_tasks needs at least 2 tasks, got {k}")
    tasks = []
    for i in range(k):
        if shared:
            ctx = NavContext(0, k, shaping=shaping * (1.0 + i / k))
        else:
            ctx = NavContext(i, k, shaping=shaping)
        color = slot_color(ctx.goal_slot)
        tasks.append(TaskSpec(f"task_{i}", f"go to the {color} goal", ctx))
    suite = TaskSuite(
        "nav_k_tasks",
        tuple(tasks),
        NavEnv,
        state_dim=2 + 2 * k,
        action_dim=2,
        env_kwargs=(("horizon", int(_param(params, "horizon", 150))),),
    )
    check_distinct_rewards(suite)
    return suite


SUITES: Dict[str, Callable[[Mapping[str, Any]], TaskSuite]] = {
    "tmaze_pair": tmaze_pair,
    "tmaze_composite": tmaze_composite,
    "nav_k_tasks": nav_k_tasks,
}


def check_distinct_rewards(suite: TaskSuite) -> None:
    if len({t.context for t in suite.tasks}) < 2:
        raise ConfigError(f"suite '{suite.name}' has fewer than 2 distinct reward maps")


def make_suite(name: str, params: Optional[Mapping[str, Any]] = None) -> TaskSuite:
    try:
        factory = SUITES[name]
    except KeyError:
        raise ConfigError(f"unknown suite '{name}', expected one of {sorted(SUITES)}") from None
    return factory(params or {})


def _context_from_fields(ctx_cls: type, fields: Mapping[str, str], where: str) -> Any:
    hints = typing.get_type_hints(ctx_cls)
    kwargs = {}
    for key, value in fields.items():
        if key not in hints:
            raise ConfigError(f"{where}: unknown context field '{key}'")
        try:
            kwargs[key] = coerce_value(value, hints[key])
        except ValueError as e:
            raise ConfigError(f"{where}: field '{key}': {e}") from None
    try:
        return ctx_cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from None


def _split_fields(tokens, where: str) -> Dict[str, str]:
    fields = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise ConfigError(f"{where}: expected key=value, got {tok!r}")
        fields[key] = value
    return fields


def read_suite_file(path: Union[str, os.PathLike]) -> TaskSuite:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    header, tasks = None, []
    stack = ExceptionStack(message=f"Invalid suite file {path}")
    for lineno, line in enumerate(lines, start=1):
        where = f"{path}:{lineno}"
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if header is None:
            parts = line.split()
            if parts[0] != "suite" or len(parts) < 2:
                raise ConfigError(f"{where}: suite files start with 'suite <name> family=...'")
            header = (parts[1], _split_fields(parts[2:], where))
            if header[1].get("family") not in FAMILIES:
                raise ConfigError(f"{where}: unknown family {header[1].get('family')!r}, expected one of {sorted(FAMILIES)}")
            continue
        cols = line.split("\t")
        if len(cols) < 3:
            stack.exceptions.append(ConfigError(f"{where}: expected task_id, text and context columns"))
            continue
        try:
            ctx = _context_from_fields(FAMILIES[header[1]["family"]][1], _split_fields(cols[2].split(), where), where)
            tasks.append(TaskSpec(cols[0].strip(), cols[1].strip(), ctx))
        except ConfigError as e:
            stack.exceptions.append(e)
    stack.resolve()
    if header is None:
        raise ConfigError(f"{path}: empty suite file")
    name, opts = header
    family_cls, ctx_cls = FAMILIES[opts["family"]]
    probe = family_cls[tasks[0].context](task_id=tasks[0].task_id, text=tasks[0].text) if tasks else None
    env_kwargs = tuple((k, int(v)) for k, v in opts.items() if k == "horizon")
    suite = TaskSuite(
        name,
        tuple(tasks),
        family_cls,
        state_dim=probe.state_dim if probe else 0,
        action_dim=probe.action_dim if probe else 0,
        env_kwargs=env_kwargs,
    )
    for t in suite.tasks:
        suite.make_env(t)
    logger.debug("read suite %s with %d tasks from %s", name, len(suite), path)
    return suite


def write_suite_file(suite: TaskSuite, path: Union[str, os.PathLike]) -> None:
    family = next(k for k, (f, _) in FAMILIES.items() if f is suite.family)
    opts = " ".join(f"{k}={v}" for k, v in suite.env_kwargs)
    lines = [f"suite {suite.name} family={family} {opts}".rstrip()]
    for t in suite.tasks:
        fields = " ".join(
            f"{f.name}={format_value(getattr(t.context, f.name)).replace(' ', '')}"
            for f in dataclasses.fields(t.context)
        )
        lines.append(f"{t.task_id}\t{t.text}\t{fields}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def resolve_suite(name_or_path: str, params: Optional[Mapping[str, Any]] = None) -> TaskSuite:
    """A built-in suite name, or a path to a suite definition file."""
    if name_or_path in SUITES:
        return make_suite(name_or_path, params)
    if os.path.exists(name_or_path):
        return read_suite_file(name_or_path)
    raise ConfigError(f"'{name_or_path}' is neither a known suite nor a suite file")
