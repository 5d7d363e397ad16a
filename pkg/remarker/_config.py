from __future__ import annotations

import json
import os
import sys
from collections.abc import Mapping
from dataclasses import dataclass, field, fields
from datetime import datetime
from typing import TYPE_CHECKING, Any

from remarker._corpus import NO_RELATION, FieldMapping, TypeVocabulary
from remarker._errors import ConfigError, DataError
from remarker._router import DEFAULT_PAIR_KEYS, EntityPairKey
from remarker._utils import atomic_write

# NOTE: Python 3.11+ ships tomllib.
# After dropping Python 3.10 support, remove the tomli fallback.
# See:
#   - https://docs.python.org/3/library/tomllib.html
if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

if TYPE_CHECKING:
    from remarker._classifier.softmax import TrainConfig
    from remarker._eval import StrictMode


CONFIG_ENV = "REMARKER_CONFIG"
_SECTIONS = ("train", "corpus", "fields", "router", "eval")
_CORPUS_KEYS = ("types", "aliases", "closed", "strict", "inclusive_end")
_EVAL_KEYS = ("no_relation", "strict_mode")


def load_config(path: str | os.PathLike[str] | None) -> dict[str, dict[str, Any]]:
    """
    Read a TOML config file. With ``path=None`` the ``REMARKER_CONFIG``
    environment variable is consulted; no file at all yields an empty config.
    """
    path = path or os.getenv(CONFIG_ENV)
    if not path:
        return {}
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: malformed config ({e})") from e
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"{path}: unknown config section(s) {unknown}")
    for name, section in data.items():
        if not isinstance(section, dict):
            raise ConfigError(f"{path}: [{name}] must be a table")
    return data


def _check_keys(
    section: str, data: Mapping[str, Any], allowed: tuple[str, ...]
) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {unknown}")


def _pick(override: Any, section: Mapping[str, Any], key: str, default: Any) -> Any:
    """CLI flag, then config file, then built-in default."""
    if override is not None:
        return override
    return section.get(key, default)


@dataclass(frozen=True)
class RunConfig:
    """Every setting a subcommand may depend on, after precedence resolution."""

    train: TrainConfig
    fields: FieldMapping = field(default_factory=FieldMapping)
    types: TypeVocabulary = field(default_factory=TypeVocabulary)
    strict: bool = True
    keys: tuple[EntityPairKey, ...] = DEFAULT_PAIR_KEYS
    no_relation: str = NO_RELATION
    strict_mode: StrictMode = "accuracy"

    def to_dict(self) -> dict[str, Any]:
        return {
            "train": self.train.to_dict(),
            "fields": {
                f.name: getattr(self.fields, f.name) for f in fields(self.fields)
            },
            "corpus": {
                "types": list(self.types.names),
                "aliases": dict(self.types.aliases),
                "closed": self.types.closed,
                "strict": self.strict,
            },
            "router": {"keys": [str(k) for k in self.keys]},
            "eval": {"no_relation": self.no_relation, "strict_mode": self.strict_mode},
        }


def resolve_config(
    file_cfg: Mapping[str, Mapping[str, Any]],
    *,
    train_overrides: Mapping[str, Any] | None = None,
    field_map: FieldMapping | None = None,
    strict: bool | None = None,
    keys: tuple[EntityPairKey, ...] | None = None,
    no_relation: str | None = None,
    strict_mode: str | None = None,
) -> RunConfig:
    """
    Merge command-line values (``None`` meaning "not given") over the config
    file over built-in defaults.
    """
    from remarker._classifier.softmax import TrainConfig
    from remarker._eval import STRICT_MODES

    train_section = dict(file_cfg.get("train", {}))
    train_keys = tuple(f.name for f in fields(TrainConfig))
    _check_keys("train", train_section, train_keys)
    train_section.update(
        {k: v for k, v in (train_overrides or {}).items() if v is not None}
    )
    try:
        train = TrainConfig.from_dict(train_section)
    except TypeError as e:
        raise ConfigError(f"invalid [train] value ({e})") from e

    corpus = file_cfg.get("corpus", {})
    _check_keys("corpus", corpus, _CORPUS_KEYS)
    fields_section = file_cfg.get("fields", {})
    if field_map is None:
        try:
            field_map = FieldMapping.from_dict(
                {**fields_section, "inclusive_end": corpus.get("inclusive_end", False)}
            )
        except DataError as e:
            raise ConfigError(f"invalid [fields] section ({e.reason})") from e
    defaults = TypeVocabulary()
    types = TypeVocabulary(
        tuple(str(t).upper() for t in corpus.get("types", defaults.names)),
        {
            **defaults.aliases,
            **{k.upper(): v.upper() for k, v in corpus.get("aliases", {}).items()},
        },
        bool(corpus.get("closed", False)),
    )

    router = file_cfg.get("router", {})
    _check_keys("router", router, ("keys",))
    if keys is None:
        try:
            keys = tuple(EntityPairKey.parse(k) for k in router.get("keys", ()))
        except DataError as e:
            raise ConfigError(f"invalid [router] keys ({e.reason})") from e
        keys = keys or DEFAULT_PAIR_KEYS

    ev = file_cfg.get("eval", {})
    _check_keys("eval", ev, _EVAL_KEYS)
    mode = _pick(strict_mode, ev, "strict_mode", "accuracy")
    if mode not in STRICT_MODES:
        raise ConfigError(f"strict mode must be one of {STRICT_MODES}, got {mode!r}")

    return RunConfig(
        train=train,
        fields=field_map,
        types=types,
        strict=bool(_pick(strict, corpus, "strict", True)),
        keys=keys,
        no_relation=str(_pick(no_relation, ev, "no_relation", NO_RELATION)),
        strict_mode=mode,
    )


@dataclass
class RunManifest:
    """Frozen record of one CLI run: what ran, with which settings, and when."""

    command: str
    config: dict[str, Any]
    version: str
    seed: int
    argv: list[str] = field(default_factory=list)
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    started: datetime = field(default_factory=datetime.now)
    finished: datetime | None = None
    status: str = "running"
    #: Exception class name of a failed run.
    error: str | None = None

    def finish(self, status: str = "ok", error: str | None = None) -> None:
        self.finished = datetime.now()
        self.status = status
        self.error = error

    def fail(self, exc: BaseException) -> None:
        self.finish("error", type(exc).__name__)

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "version": self.version,
            "seed": self.seed,
            "argv": list(self.argv),
            "inputs": dict(self.inputs),
            "outputs": list(self.outputs),
            "config": self.config,
            "started": self.started.isoformat(timespec="seconds"),
            "finished": self.finished and self.finished.isoformat(timespec="seconds"),
            "status": self.status,
            "error": self.error,
        }

    def summary(self) -> str:
        return (
            f"remarker {self.version} {self.command} (seed {self.seed}), "
            f"outputs: {', '.join(self.outputs) or 'none'}"
        )

    def write(self, path: str | os.PathLike[str]) -> None:
        with atomic_write(path) as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")
