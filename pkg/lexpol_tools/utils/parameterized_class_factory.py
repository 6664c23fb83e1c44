import textwrap
import typing
from inspect import getmembers, isclass, isfunction, signature
from typing import Any, Dict, Generic, List, Optional, Type, TypeVar, Union

import makefun

T = TypeVar("T")
_G = TypeVar("_G")


class ParameterizedClassFactory(Generic[_G, T]):
    """Create subclasses with an instance-valued parameter bound in.

    Every method argument annotated with ``param_type`` is pre-filled with the
    subscripted instance, so ``Factory[p]`` is a class whose constructor and
    methods no longer take (and cannot be given) that argument.  Reified
    classes are cached per parameter, which requires parameters to be
    hashable.

    The environments use this to express a block-contextual MDP: one generic
    environment class, reified once per task context.

    Args:
        generic: class to reify
        param_type: type of the parameter to inject
        cls_name: name used for reified classes, ``cls_name[param]``
        default_param_inst: used when the factory is called without being
            subscripted; an Exception (class or instance) is raised instead

    Example:

    >>> @dataclasses.dataclass(frozen=True)
    ... class Goal:
    ...     x: float
    >>>
    >>> class _Env:
    ...     def __init__(self, goal: Goal, speed: float = 1.0) -> None:
    ...         self.goal, self.speed = goal, speed
    >>>
    >>> Env = ParameterizedClassFactory(_Env, Goal, "Env")
    >>> env = Env[Goal(0.5)](speed=2.0)
    >>> env.goal
    Goal(x=0.5)
    """

    def __init__(
        self,
        generic: Type[_G],
        param_type: Type[T],
        cls_name: str,
        default_param_inst: Optional[Union[Exception, Type[Exception], T]] = None,
    ) -> None:
        if not isclass(param_type):
            raise TypeError(f"{self.__class__} requires param_type to be a class")
        self._generic = generic
        self._param_type = param_type
        self._cls_name = cls_name
        self._default_inst = default_param_inst
        self._methods = {
            name: to_subst
            for name, func in getmembers(self._generic, isfunction)
            if (to_subst := self._annotated_params(func))
        }
        self._reified: Dict[Any, Type[_G]] = {}

    def _annotated_params(self, func) -> List[str]:
        # get_type_hints resolves string annotations left by postponed evaluation
        try:
            hints = typing.get_type_hints(func)
        except (NameError, TypeError):
            hints = {}
        return [
            name
            for name in signature(func).parameters
            if hints.get(name) is self._param_type
        ]

    @property
    def generic(self) -> Type[_G]:
        return self._generic

    def __getitem__(self, item: T) -> Type[_G]:
        if not isinstance(item, self._param_type):
            raise TypeError(
                f"{self._cls_name}[...] takes a {self._param_type.__name__}, got {type(item).__name__}"
            )
        if item in self._reified:
            return self._reified[item]

        class _Reified(self._generic):
            pass

        _Reified.__doc__ = f"{self._cls_name} bound to {item!r}.\n\n{self._generic.__doc__ or ''}"
        _Reified.__name__ = _Reified.__qualname__ = (
            f"{self._cls_name}[{textwrap.shorten(str(item), 40)}]"
        )
        _Reified.__module__ = self._generic.__module__
        _Reified.PARAM = item

        for name, to_subst in self._methods.items():
            setattr(
                _Reified,
                name,
                makefun.partial(
                    getattr(self._generic, name),
                    **{var: item for var in to_subst},
                ),
            )

        self._reified[item] = _Reified
        return _Reified

    def __call__(self, *args, **kwargs) -> _G:
        default = self._default_inst
        if isinstance(default, Exception):
            raise default
        if isclass(default) and issubclass(default, Exception):
            raise default(
                f"{self._cls_name} must be subscripted with a {self._param_type.__name__} before instantiation"
            )
        return self[default](*args, **kwargs)
