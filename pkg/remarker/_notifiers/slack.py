from __future__ import annotations

from typing import TYPE_CHECKING

from slack_sdk import WebClient

from remarker import _log
from remarker._notifiers.base import BaseNotifier, _SendConfig

if TYPE_CHECKING:
    from remarker._log import LevelStr


class SlackNotifier(BaseNotifier):
    """
    Posts run reports to a Slack channel through the Web API.

    Example:

        .. code-block:: console

           $ export SLACK_BOT_TOKEN=xoxb-...
           $ export SLACK_CHANNEL=relation-runs
           $ remarker --notify slack train --input train.marked.jsonl --model m.rmk
    """

    _platform = "Slack"

    def _lazy_init(self) -> None:
        fresh = not self._initialized
        super()._lazy_init()
        if fresh:
            self._client = WebClient(token=self._token)

    def _do_send(
        self,
        send_config: _SendConfig,
        message: str,
        tb: str | None = None,
        level: LevelStr = "info",
    ) -> None:
        channel = send_config.channel
        if channel is None:
            _log.error(
                "No Slack channel specified.\nSkipping sending message to Slack."
            )
            return
        self._client.chat_postMessage(
            text=self._with_mention(send_config, message, level),
            channel=channel,
            attachments=tb
            and [
                {
                    "blocks": [
                        {
                            "type": "section",
                            "text": {"type": "plain_text", "text": tb},
                        }
                    ],
                    "color": "#ff3d33",
                }
            ],
        )
