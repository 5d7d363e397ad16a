from __future__ import annotations

import traceback
from collections.abc import Iterable, Iterator, Sequence
from contextlib import AbstractContextManager, ContextDecorator
from datetime import datetime
from typing import TYPE_CHECKING, Generic, TypeVar

from remarker import _log
from remarker._log import RESET, fg256
from remarker._log import Glyph as _G  # noqa: N814
from remarker._utils import format_timedelta

if TYPE_CHECKING:
    import sys
    from collections.abc import Generator
    from types import TracebackType

    from remarker._log import LevelStr
    from remarker._notifiers.base import BaseNotifier

    if sys.version_info >= (3, 11):
        from typing import Self
    else:
        from typing_extensions import Self


# NOTE: Python 3.12+ (PEP 695) supports inline type parameter syntax.
# After dropping Python 3.11 support, update this to use that instead.
# See:
#   - https://peps.python.org/pep-0695/
#   - https://docs.python.org/3/reference/compound_stmts.html#type-params
T = TypeVar("T")


class RunWatch(ContextDecorator, AbstractContextManager):
    """
    Time a pipeline step and report its start, end or failure.

    Messages go to the console log and to every attached notifier. Exceptions
    are reported and re-raised, never swallowed. With ``log_errors=False`` the
    failure goes to the notifiers only, for callers that print their own
    diagnostic.
    """

    def __init__(
        self,
        label: str,
        notifiers: Sequence[BaseNotifier] = (),
        log_errors: bool = True,
    ) -> None:
        self._label = label
        self._notifiers = list(notifiers)
        self._log_errors = log_errors
        self._start: datetime | None = None
        self._summary: list[str] = []

    def add_summary(self, line: str) -> None:
        """Attach a line (e.g. a headline metric) to the end-of-run message."""
        self._summary.append(line)

    @property
    def elapsed(self) -> str:
        assert self._start is not None
        return format_timedelta(datetime.now() - self._start)

    def _emit(
        self, message: str, tb: str | None = None, level: LevelStr = "info"
    ) -> None:
        if level != "error" or self._log_errors:
            _log.log(level, message)
        for notifier in self._notifiers:
            notifier.send(message, tb=tb, level=level)

    def __enter__(self) -> Self:
        self._start = datetime.now()
        self._summary = []
        self._emit(f"Start {fg256(45)}<{self._label}>{RESET}")
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        et_msg = f"{fg256(8)} {_G.CBULLET} Execution time: {self.elapsed}{RESET}"
        details = "".join(f"\n {_G.RARROWF} {line}" for line in self._summary)
        if exc_type is None:
            self._emit(f"End {fg256(45)}<{self._label}>{RESET}{details}\n{et_msg}")
            return
        exc_only = "".join(traceback.format_exception_only(exc_type, exc_val)).strip()
        tb_str = "".join(traceback.format_exception(exc_type, exc_val, tb))
        self._emit(
            f"Error while running {fg256(45)}<{self._label}>{RESET}: "
            f"{exc_only}\n{et_msg}",
            tb=tb_str,
            level="error",
        )


class EpochWatch(Generic[T]):
    """
    Iterate over training epochs, logging progress every ``step`` epochs.

    Call :meth:`record` inside the loop to attach metrics (e.g. the loss) to
    the next progress line.
    """

    def __init__(
        self,
        iterable: Iterable[T],
        label: str,
        step: int = 1,
        total: int | None = None,
    ) -> None:
        self._iterable = iterable
        self._label = label
        self._step = max(1, step)
        self._total = (
            len_fn() if (len_fn := getattr(iterable, "__len__", None)) else total
        )
        self._metrics: dict[str, float] = {}
        self._count = 0
        self._start: datetime | None = None

    def record(self, **metrics: float) -> None:
        self._metrics.update(metrics)

    def __iter__(self) -> Iterator[T]:
        return self._gen()

    def _gen(self) -> Generator[T, None, None]:
        self._start = datetime.now()
        for item in self._iterable:
            yield item
            self._count += 1
            if self._count % self._step == 0 or self._count == self._total:
                self._report()

    def _report(self) -> None:
        assert self._start is not None
        of_total = f"/{self._total}" if self._total is not None else ""
        metrics = " ".join(f"{k}={v:.4f}" for k, v in self._metrics.items())
        _log.info(
            f"{self._label}: epoch {self._count}{of_total} {metrics} "
            f"{fg256(8)}({format_timedelta(datetime.now() - self._start)}){RESET}"
        )
