from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Literal

_PREFIX = "[remarker] "
_SGR = re.compile(r"\x1b\[[0-9;]*m")

_CSI = "\x1b["
RESET = f"{_CSI}0m"


def fg256(n: int) -> str:
    return f"{_CSI}38;5;{n}m"


# NOTE: Python 3.12+ (PEP 695) supports type statement.
# After dropping Python 3.11 support, update this to use that instead.
# See:
#   - https://peps.python.org/pep-0695/
#   - https://docs.python.org/3/library/typing.html#type-aliases
LevelStr = Literal["info", "warning", "error"]
LEVEL_ORDER: dict[LevelStr, int] = {
    "info": 0,
    "warning": 1,
    "error": 2,
}


@dataclass(frozen=True)
class _Style:
    tag: str
    color: str
    time_color: str


_STYLES: dict[LevelStr, _Style] = {
    "info": _Style("[INFO] ", fg256(48), fg256(14)),
    "warning": _Style("[WARN] ", fg256(214), fg256(11)),
    "error": _Style("[ERROR] ", fg256(196), fg256(213)),
}

_verbose = True


def set_verbose(verbose: bool) -> None:
    """Toggle ``info`` and ``warning`` output. Errors are always printed."""
    global _verbose
    _verbose = verbose


def log(level: LevelStr, message: str, with_timestamp: bool = True) -> None:
    """
    Print ``message`` to standard error, one colored prefix per line.

    Standard output stays reserved for data (preprocessed records, tables).
    """
    if level != "error" and not _verbose:
        return
    style = _STYLES[level]
    prefix = f"{style.color}{_PREFIX}{style.tag}{RESET}"
    if with_timestamp:
        now = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
        prefix += f"{style.time_color}{now} {RESET}"
    print("\n".join(prefix + line for line in message.splitlines()), file=sys.stderr)


def info(message: str, with_timestamp: bool = True) -> None:
    log("info", message, with_timestamp)


def warn(message: str, with_timestamp: bool = True) -> None:
    log("warning", message, with_timestamp)


def error(message: str, with_timestamp: bool = True) -> None:
    log("error", message, with_timestamp)


# NOTE: Python 3.11+ introduces enum.StrEnum.
# After dropping Python 3.10 support, switch to stdlib StrEnum and remove the shim.
# See:
#   - https://docs.python.org/3/library/enum.html#enum.StrEnum
#   - https://docs.python.org/3.11/whatsnew/3.11.html
class Glyph(str, Enum):
    H = "─"
    RARROWF = "▷"
    CBULLET = "⦿"

    def __str__(self) -> str:
        return self.value


def strip_sgr(text: str) -> str:
    """Remove ANSI SGR sequences (ESC[ ... m)."""
    return _SGR.sub("", text)
