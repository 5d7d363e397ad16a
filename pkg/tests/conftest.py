from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from remarker import _log

if TYPE_CHECKING:
    from pytest import MonkeyPatch


@pytest.fixture(autouse=True)
def _verbose_log(monkeypatch: MonkeyPatch) -> None:
    # `remarker --quiet` flips module-level state
    monkeypatch.setattr(_log, "_verbose", True)
