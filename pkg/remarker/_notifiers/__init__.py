from __future__ import annotations

from remarker._errors import UsageError
from remarker._notifiers.base import BaseNotifier
from remarker._notifiers.discord import DiscordNotifier
from remarker._notifiers.slack import SlackNotifier

NOTIFIERS: dict[str, type[BaseNotifier]] = {
    "slack": SlackNotifier,
    "discord": DiscordNotifier,
}


def make_notifier(name: str) -> BaseNotifier:
    try:
        return NOTIFIERS[name.lower()]()
    except KeyError:
        raise UsageError(
            f"unknown notifier {name!r} (choose from {', '.join(NOTIFIERS)})"
        ) from None


__all__ = [
    "NOTIFIERS",
    "BaseNotifier",
    "DiscordNotifier",
    "SlackNotifier",
    "make_notifier",
]
