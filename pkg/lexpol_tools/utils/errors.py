"""Exception hierarchy shared by every lexpol_tools subpackage.

Each class mixes in the builtin it most resembles, so callers that only know
about ``ValueError`` or ``KeyError`` still catch the right thing.  The
``EXIT_CODE`` attribute is what ``lexpol`` returns when the exception escapes
a command.
"""

from typing import Iterable


class LexpolError(Exception):
    EXIT_CODE: int = 1


class ShapeError(LexpolError, ValueError):
    """Array dimensions do not chain or do not match a declared shape."""


class NumericError(LexpolError, ArithmeticError):
    """A NaN or infinity showed up where only finite values are allowed."""

    EXIT_CODE = 3


class StateError(LexpolError, RuntimeError):
    """An operation was called out of order (e.g. backward before forward)."""


class ArgumentError(LexpolError, ValueError):
    """An argument is empty or inconsistent with the others."""


class TaskLookupError(LexpolError, KeyError):
    EXIT_CODE = 2

    def __str__(self) -> str:
        # KeyError quotes its argument; keep the message readable
        return str(self.args[0]) if self.args else ""


class ConfigError(LexpolError, ValueError):
    EXIT_CODE = 2


class CheckpointError(LexpolError, OSError):
    EXIT_CODE = 4


def exit_code_for(exc: BaseException) -> int:
    """Pick the exit code for an exception or an ExceptionGroup of them.

    Groups report the code of their first leaf; a bare OSError is an I/O
    failure even if it did not come from this package.
    """
    if isinstance(exc, BaseExceptionGroup):
        return exit_code_for(exc.exceptions[0])
    if isinstance(exc, LexpolError):
        return exc.EXIT_CODE
    if isinstance(exc, OSError):
        return CheckpointError.EXIT_CODE
    return 1


def leaf_exceptions(exc: BaseException) -> Iterable[BaseException]:
    if isinstance(exc, BaseExceptionGroup):
        for sub in exc.exceptions:
            yield from leaf_exceptions(sub)
    else:
        yield exc
