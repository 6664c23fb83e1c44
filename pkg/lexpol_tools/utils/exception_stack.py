from __future__ import annotations

from collections import deque
from contextlib import AbstractContextManager
from functools import partial
from typing import Any, Callable, List, Optional, Tuple


class ExceptionStack(AbstractContextManager):
    """Run a queue of independent tasks, collecting every failure.

    Used wherever one failure should not hide the others: validating all
    fields of a config, or joining the workers of a multi-seed run.

    Methods:
        join: execute tasks and return results, recording exceptions
        map: queue a function over a list of argument tuples
        resolve: raise the recorded exceptions as one ExceptionGroup
    """

    def __init__(
        self,
        tasks: Optional[List[Callable[[], Any]]] = None,
        message: str = "Exception stack terminated with errors",
    ) -> None:
        """
        Args:
            tasks: callables to execute; more can be queued with ``add``/``map``
            message: message of the ExceptionGroup raised by ``resolve``
        """
        self.tasks = deque()
        self.labels = deque()
        for task in tasks or []:
            self.add(task)
        self.message = message
        self.exceptions = []

    def add(self, task: Callable[[], Any], label: Optional[str] = None) -> ExceptionStack:
        self.tasks.append(task)
        self.labels.append(label or getattr(task, "__name__", None))
        return self

    def join(self) -> List[Any]:
        """Execute pending tasks and return their results in order.

        A task that raises contributes None to the results; its exception is
        annotated with the task's label (or index) and kept in
        ``self.exceptions``.

        >>> with ExceptionStack(tasks) as results:
        ...     # every task has run; failures are raised as a group on exit
        """
        results = []
        while self.tasks:
            task, label = self.tasks.popleft(), self.labels.popleft()
            try:
                results.append(task())
            except Exception as e:
                where = label if label else f"task index {len(results)}"
                e.add_note(f"Exception occurred in {where}")
                self.exceptions.append(e)
                results.append(None)
        return results

    def resolve(self) -> None:
        """Raise recorded exceptions as an ExceptionGroup, if there are any.

        Raises:
            ExceptionGroup
        """
        if self.exceptions:
            raise ExceptionGroup(self.message, self.exceptions) from None

    def map(
        self,
        func: Callable[..., Any],
        args: List[Tuple[Any, ...]],
        labels: Optional[List[str]] = None,
    ) -> ExceptionStack:
        """Queue ``func(*a)`` for each tuple in ``args``; returns self."""
        labels = labels or [None] * len(args)
        for a, label in zip(args, labels):
            self.add(partial(func, *a), label)
        return self

    def __enter__(self):
        return self.join()

    def __exit__(self, exc_type, exc_val, traceback):
        if isinstance(exc_val, Exception):
            self.exceptions.append(exc_val)
        self.resolve()
