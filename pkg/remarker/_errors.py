from __future__ import annotations


class RemarkerError(Exception):
    """Base class for every error raised by remarker."""


class UsageError(RemarkerError):
    """Bad command-line usage (unknown subcommand, flag or flag value)."""


class DataError(RemarkerError, ValueError):
    """
    Invalid input data.

    The optional context attributes are folded into the message so the CLI can
    print it as a one-line diagnostic.
    """

    def __init__(
        self,
        message: str,
        *,
        path: str | None = None,
        line: int | None = None,
        row: int | None = None,
        instance_id: str | None = None,
    ) -> None:
        self.reason = message
        self.path = path
        self.line = line
        self.row = row
        self.instance_id = instance_id
        super().__init__(self._format())

    def _format(self) -> str:
        where = [
            self.path,
            self.line is not None and f"line {self.line}",
            self.row is not None and f"row {self.row}",
            self.instance_id is not None and f"instance {self.instance_id!r}",
        ]
        location = ", ".join(w for w in where if w)
        return f"{location}: {self.reason}" if location else self.reason


class MarkerCollisionError(DataError):
    """Entity spans overlap or already contain marker tokens."""


class DegenerateLabelSetError(DataError):
    """Training data carries fewer than two distinct labels."""


class SchemeMismatchError(RemarkerError):
    """A model and an instance were produced under different marker schemes."""


class ArtifactError(RemarkerError):
    """A persisted model artifact cannot be read."""


class ChecksumError(ArtifactError):
    pass


class FormatVersionError(ArtifactError):
    pass


class ConfigError(UsageError, ValueError):
    """An option value is out of range or a config file is malformed."""
