from __future__ import annotations

import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from remarker import _log
from remarker._log import LEVEL_ORDER, strip_sgr

if TYPE_CHECKING:
    from remarker._log import LevelStr


@dataclass(frozen=True)
class _SendConfig:
    channel: str | None = None
    mention_to: str | None = None
    mention_level: LevelStr = "error"
    mention_if_ends: bool = True
    disable: bool = False


class BaseNotifier(ABC):
    """
    Abstract base class for chat notifiers that receive run reports.

    A notifier never fails a run: configuration problems disable it with an error
    log, and delivery errors are logged and dropped.
    """

    _platform: str
    """Name of the notification platform (e.g., "Slack")."""

    def __init__(
        self,
        channel: str | None = None,
        mention_to: str | None = None,
        mention_level: LevelStr = "error",
        mention_if_ends: bool = True,
        token: str | None = None,
        disable: bool = False,
    ) -> None:
        """
        Args:
            channel:
                Default channel. Falls back to the ``{PLATFORM}_CHANNEL`` environment
                variable (e.g., ``SLACK_CHANNEL``).
            mention_to:
                User to mention. Falls back to ``{PLATFORM}_MENTION_TO``.
            mention_level: Minimum message level that triggers the mention.
            mention_if_ends: Also mention on the end-of-run message.
            token:
                Bot token. Falls back to ``{PLATFORM}_BOT_TOKEN``.
            disable: Build the notifier but never send anything.
        """
        self._mention_to = mention_to
        self._token = token
        self._mention_level: LevelStr = mention_level
        self._mention_if_ends = mention_if_ends
        self._default_channel = channel
        self._disable = disable
        self._initialized = False

    @property
    def platform(self) -> str:
        return self._platform

    def _lazy_init(self) -> None:
        """Read settings left unset in the constructor from the environment."""
        if self._initialized:
            return
        self._initialized = True
        env = self._platform.upper()
        self._mention_to = self._mention_to or os.getenv(f"{env}_MENTION_TO")
        self._token = self._token or os.getenv(f"{env}_BOT_TOKEN")
        if not self._token and not self._disable:
            _log.error(
                f"Missing {self._platform} bot token. "
                f"Please set the {env}_BOT_TOKEN "
                "environment variable or pass it as an argument."
            )
            self._disable = True
        self._default_channel = self._default_channel or os.getenv(f"{env}_CHANNEL")

    def send(
        self,
        data: Any,
        *,
        tb: str | None = None,
        level: LevelStr = "info",
        channel: str | None = None,
        mention_to: str | None = None,
    ) -> None:
        """
        Send a message. Color codes are stripped before delivery.

        Args:
            data: The message; stringified.
            tb: Optional traceback, attached separately from the text.
            level: Message level, used for the mention threshold.
            channel: Override the default channel.
            mention_to: Override the default user to mention.
        """
        self._lazy_init()
        config = _SendConfig(
            channel=channel or self._default_channel,
            mention_to=mention_to or self._mention_to,
            mention_level=self._mention_level,
            mention_if_ends=self._mention_if_ends,
            disable=self._disable,
        )
        if config.disable:
            return
        try:
            self._do_send(config, strip_sgr(str(data)), tb, level)
        except Exception as e:
            _log.error(f"Error sending to {self._platform}: {e}")

    @staticmethod
    def _with_mention(config: _SendConfig, message: str, level: LevelStr) -> str:
        if config.mention_to and (
            LEVEL_ORDER[level] >= LEVEL_ORDER[config.mention_level]
            or (config.mention_if_ends and message.startswith("End"))
        ):
            return f"<{config.mention_to}>\n{message}"
        return message

    @abstractmethod
    def _do_send(
        self,
        send_config: _SendConfig,
        message: str,
        tb: str | None = None,
        level: LevelStr = "info",
    ) -> None:
        raise NotImplementedError
