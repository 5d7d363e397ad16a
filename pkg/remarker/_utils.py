from __future__ import annotations

import contextlib
import os
import tempfile
from datetime import timedelta
from pathlib import Path
from typing import IO, TYPE_CHECKING, Any

if TYPE_CHECKING:
    from collections.abc import Iterator

DATA_DIR_ENV = "REMARKER_DATA_DIR"


def format_timedelta(td: timedelta) -> str:
    days = td.days
    hours, remainder = divmod(td.seconds, 3600)
    minutes, seconds = divmod(remainder, 60)
    parts = [
        days and f"{days}d",
        hours and f"{hours}h",
        minutes and f"{minutes}m",
        seconds and f"{seconds}s",
    ]
    return " ".join([p for p in parts if p]) or "0s"


@contextlib.contextmanager
def atomic_write(path: str | os.PathLike[str], mode: str = "w") -> Iterator[IO[Any]]:
    """
    Open a temporary sibling of ``path`` for writing and rename it over ``path``
    when the block exits cleanly. On error the temporary file is removed and
    ``path`` is left untouched.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    text_kwargs: dict[str, Any] = (
        {} if "b" in mode else {"encoding": "utf-8", "newline": ""}
    )
    try:
        with os.fdopen(fd, mode, **text_kwargs) as f:
            yield f
        os.replace(tmp, target)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def resolve_data_path(path: str | os.PathLike[str]) -> Path:
    """
    Resolve an input path. Relative paths that do not exist in the working
    directory are looked up under ``$REMARKER_DATA_DIR`` when it is set.
    """
    p = Path(path)
    if p.is_absolute() or p.exists():
        return p
    data_dir = os.getenv(DATA_DIR_ENV)
    if data_dir and (candidate := Path(data_dir) / p).exists():
        return candidate
    return p
