"""Flat ``key = value`` config files.

Format::

    # comment
    include = defaults.cfg      # loaded first, relative to this file
    discount = 0.99
    seeds = 0, 1, 2

Later lines (and the including file) override earlier ones.  Values are
typed by the annotation of the dataclass field they land in.
"""

import dataclasses
import logging
import os
import typing
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Tuple, Type, TypeVar, Union

from .errors import ConfigError
from .exception_stack import ExceptionStack

logger = logging.getLogger(__name__)

D = TypeVar("D")

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


@dataclasses.dataclass(frozen=True)
class ConfigEntry:
    key: str
    value: str
    path: str = "<string>"
    lineno: int = 0

    @property
    def where(self) -> str:
        return f"{self.path}:{self.lineno}"


def parse_config_text(
    text: str, path: str = "<string>", _seen: Optional[Tuple[str, ...]] = None
) -> Dict[str, ConfigEntry]:
    """Parse config text into entries keyed by name, resolving includes."""
    seen = _seen or ()
    entries: Dict[str, ConfigEntry] = {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}"))
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            errors.append(ConfigError(f"{path}:{lineno}: missing key"))
            continue
        if key == "include":
            base = Path(path).parent if path != "<string>" else Path.cwd()
            included = str((base / value).resolve())
            if included in seen:
                errors.append(ConfigError(f"{path}:{lineno}: include cycle through {value}"))
                continue
            try:
                entries.update(read_config_file(included, seen + (included,)))
            except OSError as e:
                errors.append(ConfigError(f"{path}:{lineno}: cannot include {value}: {e.strerror}"))
            except ExceptionGroup as group:
                errors.extend(group.exceptions)
            continue
        entries[key] = ConfigEntry(key, value, path, lineno)
    if errors:
        raise ExceptionGroup(f"Could not parse {path}", errors)
    return entries


def read_config_file(
    path: Union[str, os.PathLike], _seen: Optional[Tuple[str, ...]] = None
) -> Dict[str, ConfigEntry]:
    path = str(Path(path).resolve())
    logger.debug("reading config %s", path)
    with open(path, encoding="utf-8") as f:
        return parse_config_text(f.read(), path, _seen or (path,))


def coerce_value(value: str, annotation: Any) -> Any:
    """Convert a config string to the type named by ``annotation``."""
    origin, args = typing.get_origin(annotation), typing.get_args(annotation)
    if origin is Union:
        if type(None) in args and value.lower() in ("", "none"):
            return None
        for arg in args:
            if arg is type(None):
                continue
            try:
                return coerce_value(value, arg)
            except ValueError:
                continue
        raise ValueError(f"{value!r} does not match {annotation}")
    if origin is Literal:
        if value not in args:
            raise ValueError(f"{value!r} is not one of {', '.join(map(str, args))}")
        return value
    if origin in (tuple, list):
        item_type = args[0] if args else str
        items = [v.strip() for v in value.split(",") if v.strip()]
        return origin(coerce_value(v, item_type) for v in items)
    if annotation is bool:
        if value.lower() in _TRUE:
            return True
        if value.lower() in _FALSE:
            return False
        raise ValueError(f"{value!r} is not a boolean")
    if annotation is int:
        return int(value)
    if annotation is float:
        return float(value)
    if annotation is str:
        return value
    raise ValueError(f"unsupported config type {annotation}")


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(format_value(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def build_dataclass(
    cls: Type[D], entries: Mapping[str, ConfigEntry], strict: bool = True
) -> D:
    """Instantiate ``cls`` from entries, collecting every conversion error.

    With ``strict``, keys that are not fields of ``cls`` are errors too.
    Field validation (``validate_*`` methods) runs in ``__post_init__`` of the
    config classes themselves.
    """
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs: Dict[str, Any] = {}
    stack = ExceptionStack(message=f"Invalid {cls.__name__}")
    for key, entry in entries.items():
        if key not in names:
            if strict:
                stack.exceptions.append(ConfigError(f"{entry.where}: unknown key '{key}'"))
            continue
        try:
            kwargs[key] = coerce_value(entry.value, hints[key])
        except ValueError as e:
            stack.exceptions.append(ConfigError(f"{entry.where}: field '{key}': {e}"))
    missing = [
        f.name
        for f in dataclasses.fields(cls)
        if f.default is dataclasses.MISSING
        and f.default_factory is dataclasses.MISSING
        and f.name not in entries
    ]
    for name in missing:
        stack.exceptions.append(ConfigError(f"missing required field '{name}'"))
    stack.resolve()
    return cls(**kwargs)


def dump_dataclass(obj: Any, keys: Optional[Iterable[str]] = None) -> List[str]:
    names = keys or [f.name for f in dataclasses.fields(obj)]
    return [f"{name} = {format_value(getattr(obj, name))}" for name in names]
