from __future__ import annotations

import json
from typing import TYPE_CHECKING

import pytest

from remarker._config import (
    CONFIG_ENV,
    RunManifest,
    load_config,
    resolve_config,
)
from remarker._corpus import FieldMapping
from remarker._errors import ConfigError, DataError
from remarker._router import DEFAULT_PAIR_KEYS, EntityPairKey

if TYPE_CHECKING:
    from pathlib import Path

CONFIG = """\
[train]
epochs = 9
learning_rate = 0.2
ngrams = [1, 2, 3]

[corpus]
closed = true
types = ["org", "pers"]
aliases = { company = "org" }

[fields]
tokens = "words"

[router]
keys = ["ORG-DATE", "pers-title"]

[eval]
no_relation = "NA"
strict_mode = "micro"
"""


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    path = tmp_path / "remarker.toml"
    path.write_text(CONFIG, encoding="utf-8")
    return path


def test_defaults() -> None:
    cfg = resolve_config({})
    assert cfg.train.epochs == 5
    assert cfg.train.seed == 42
    assert cfg.keys == DEFAULT_PAIR_KEYS
    assert cfg.no_relation == "no_relation"
    assert cfg.strict_mode == "accuracy"
    assert cfg.strict


def test_file_over_defaults(config_file: Path) -> None:
    cfg = resolve_config(load_config(config_file))
    assert cfg.train.epochs == 9
    assert cfg.train.learning_rate == 0.2
    assert cfg.train.ngrams == (1, 2, 3)
    assert cfg.train.batch_size == 8
    assert cfg.fields.tokens == "words"
    assert cfg.types.names == ("ORG", "PERS")
    assert cfg.types.closed
    assert cfg.types.normalize("Company") == "ORG"
    assert cfg.keys == (EntityPairKey("ORG", "DATE"), EntityPairKey("PERS", "TITLE"))
    assert cfg.no_relation == "NA"
    assert cfg.strict_mode == "micro"


def test_flags_over_file(config_file: Path) -> None:
    cfg = resolve_config(
        load_config(config_file),
        train_overrides={"epochs": 2, "learning_rate": None, "seed": 7},
        field_map=FieldMapping(),
        strict=False,
        keys=(EntityPairKey("ORG", "ORG"),),
        no_relation="none",
        strict_mode="accuracy",
    )
    assert cfg.train.epochs == 2
    assert cfg.train.learning_rate == 0.2
    assert cfg.train.seed == 7
    assert cfg.fields.tokens == "token"
    assert not cfg.strict
    assert cfg.keys == (EntityPairKey("ORG", "ORG"),)
    assert cfg.no_relation == "none"
    assert cfg.strict_mode == "accuracy"


def test_env_var(config_file: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    assert load_config(None) == {}
    monkeypatch.setenv(CONFIG_ENV, str(config_file))
    assert load_config(None)["train"]["epochs"] == 9


@pytest.mark.parametrize(
    "text, match",
    [
        ("[model]\nepochs = 1\n", "unknown config section"),
        ("[train]\nepoch = 1\n", r"unknown key\(s\) in \[train\]"),
        ("[eval]\nmode = 'micro'\n", r"unknown key\(s\) in \[eval\]"),
        ("[train]\nepochs = 0\n", "epochs"),
        ("[train]\nbatch_size = 'big'\n", "invalid"),
        ("[eval]\nstrict_mode = 'macro'\n", "strict mode"),
        ("[router]\nkeys = ['ORG']\n", "invalid \\[router\\] keys"),
        ("[fields]\ntokens = 'id'\n", "invalid \\[fields\\]"),
        ("train = 3\n", "must be a table"),
        ("[train\n", "malformed config"),
    ],
)
def test_invalid_config(tmp_path: Path, text: str, match: str) -> None:
    path = tmp_path / "bad.toml"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError, match=match):
        resolve_config(load_config(path))


def test_to_dict(config_file: Path) -> None:
    doc = resolve_config(load_config(config_file)).to_dict()
    assert doc["train"]["epochs"] == 9
    assert doc["router"]["keys"] == ["ORG-DATE", "PERS-TITLE"]
    assert doc["eval"] == {"no_relation": "NA", "strict_mode": "micro"}
    assert doc["fields"]["tokens"] == "words"
    json.dumps(doc)


def test_manifest(tmp_path: Path) -> None:
    manifest = RunManifest(
        "train",
        resolve_config({}).to_dict(),
        "0.1.0",
        42,
        argv=["train", "--data", "train.jsonl"],
    )
    manifest.inputs["train.jsonl"] = "0" * 64
    manifest.outputs.append("model.rmk")
    assert manifest.to_dict()["finished"] is None
    manifest.finish()
    path = tmp_path / "run.manifest.json"
    manifest.write(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    assert doc["status"] == "ok"
    assert doc["seed"] == 42
    assert doc["outputs"] == ["model.rmk"]
    assert doc["inputs"] == {"train.jsonl": "0" * 64}
    assert doc["finished"] >= doc["started"]
    assert manifest.summary() == "remarker 0.1.0 train (seed 42), outputs: model.rmk"


def test_manifest_failure() -> None:
    manifest = RunManifest("train", resolve_config({}).to_dict(), "0.1.0", 42)
    assert manifest.to_dict()["error"] is None
    manifest.fail(DataError("bad line"))
    doc = manifest.to_dict()
    assert doc["status"] == "error"
    assert doc["error"] == "DataError"
    assert doc["finished"] is not None
