from __future__ import annotations

from typing import TYPE_CHECKING

import requests

from remarker import _log
from remarker._notifiers.base import BaseNotifier, _SendConfig

if TYPE_CHECKING:
    from typing import Any

    from remarker._log import LevelStr


_API = "https://discord.com/api/v10"
_TIMEOUT = 10


class DiscordNotifier(BaseNotifier):
    """
    Posts run reports to a Discord channel. Discord needs the numeric channel ID,
    channel names are not resolved.
    """

    _platform = "Discord"

    def _do_send(
        self,
        send_config: _SendConfig,
        message: str,
        tb: str | None = None,
        level: LevelStr = "info",
    ) -> None:
        channel_id = send_config.channel
        if not channel_id:
            _log.error(
                "No Discord channel ID specified.\nSkipping sending message to Discord."
            )
            return
        payload: dict[str, Any] = {
            "content": self._with_mention(send_config, message, level),
            "allowed_mentions": {"parse": ["users", "roles", "everyone"]},
        }
        if tb:
            payload["embeds"] = [{"description": tb, "color": 0xFF3D33}]
        resp = requests.post(
            f"{_API}/channels/{channel_id}/messages",
            headers={
                "Authorization": f"Bot {self._token}",
                "Content-Type": "application/json",
            },
            json=payload,
            timeout=_TIMEOUT,
        )
        resp.raise_for_status()
