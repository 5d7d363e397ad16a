from __future__ import annotations

import json
import random
from typing import TYPE_CHECKING, Any

import pytest

from remarker._corpus import (
    EntitySpan,
    FieldMapping,
    RelationLabel,
    TokenizedInstance,
    TypeVocabulary,
    compute_stats,
    dump_record,
    inter_entity_distance,
    parse_dataset,
    read_dataset,
    serialize_instance,
    validate_instance,
    write_dataset,
)
from remarker._errors import DataError
from remarker._router import EntityPairKey

from ._corpora import make, record, verb_corpus

if TYPE_CHECKING:
    from pathlib import Path


def _line(**overrides: Any) -> str:
    rec: dict[str, Any] = {
        "id": "r1",
        "token": ["A", "bought", "B"],
        "e1_start": 0,
        "e1_end": 1,
        "e1_type": "ORG",
        "e2_start": 2,
        "e2_end": 3,
        "e2_type": "ORG",
        "rel_group": "acquired_by",
    }
    rec.update(overrides)
    return json.dumps(rec)


def test_parse_single_record() -> None:
    corpus = parse_dataset([_line()])
    assert list(corpus) == [
        TokenizedInstance(
            "r1",
            ("A", "bought", "B"),
            EntitySpan(0, 1, "ORG"),
            EntitySpan(2, 3, "ORG"),
            RelationLabel("acquired_by"),
        )
    ]
    assert corpus.skipped == ()


def test_parse_span_out_of_range() -> None:
    with pytest.raises(DataError, match="subj span out of range") as e:
        parse_dataset([_line(e1_start=5, e1_end=6)], path="dev.jsonl")
    assert e.value.line == 1
    assert e.value.instance_id == "r1"
    assert str(e.value).startswith("dev.jsonl, line 1")


def test_parse_strict_and_lenient() -> None:
    lines = [_line(id="a"), "{not json", _line(id="b"), _line(id="c")]
    with pytest.raises(DataError, match="malformed record") as e:
        parse_dataset(lines)
    assert e.value.line == 2

    corpus = parse_dataset(lines, strict=False)
    assert [inst.id for inst in corpus] == ["a", "b", "c"]
    assert len(corpus.skipped) == 1
    assert corpus.skipped[0].line == 2


def test_parse_missing_key() -> None:
    rec = json.loads(_line())
    del rec["e1_type"]
    with pytest.raises(DataError, match="missing mapped key 'e1_type'"):
        parse_dataset([json.dumps(rec)])


def test_parse_unlabeled_record() -> None:
    rec = json.loads(_line())
    del rec["rel_group"]
    (inst,) = parse_dataset([json.dumps(rec)])
    assert inst.relation is None


def test_parse_duplicate_id() -> None:
    with pytest.raises(DataError, match="duplicate instance id"):
        parse_dataset([_line(), _line()])


def test_parse_skips_blank_lines() -> None:
    assert len(parse_dataset(["\n", _line(), "   \n"])) == 1


def test_parse_field_mapping_and_inclusive_end() -> None:
    mapping = FieldMapping.from_dict(
        {
            "tokens": "words",
            "subj_end": "s_last",
            "obj_end": "o_last",
            "inclusive_end": True,
        }
    )
    rec = {
        "id": "x",
        "words": ["Jo", "Ann", "runs", "Acme"],
        "e1_start": 0,
        "s_last": 1,
        "e1_type": "person",
        "e2_start": 3,
        "o_last": 3,
        "e2_type": "ORG",
        "rel_group": "employee_of",
    }
    (inst,) = parse_dataset([json.dumps(rec)], mapping)
    assert inst.subj == EntitySpan(0, 2, "PERS")
    assert inst.obj == EntitySpan(3, 4, "ORG")
    assert serialize_instance(inst, mapping) == {**rec, "e1_type": "PERS"}


@pytest.mark.parametrize(
    "data, match",
    [
        ({"id": "k", "tokens": "k"}, "distinct"),
        ({"relation": ""}, "non-empty"),
        ({"label": "x"}, "unknown field mapping"),
    ],
)
def test_field_mapping_invalid(data: dict[str, Any], match: str) -> None:
    with pytest.raises(DataError, match=match):
        FieldMapping.from_dict(data)


def test_field_mapping_from_file(tmp_path: Path) -> None:
    path = tmp_path / "map.json"
    path.write_text('{"tokens": "words"}', encoding="utf-8")
    assert FieldMapping.from_file(path).tokens == "words"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(DataError, match="JSON object"):
        FieldMapping.from_file(path)


@pytest.mark.parametrize(
    "raw, expected",
    [("org", "ORG"), ("Person", "PERS"), ("per", "PERS"), ("gov agy", "GOV_AGY")],
)
def test_type_vocabulary_normalize(raw: str, expected: str) -> None:
    assert TypeVocabulary().normalize(raw) == expected


def test_closed_type_vocabulary() -> None:
    closed = TypeVocabulary(names=("ORG",), closed=True)
    with pytest.raises(DataError, match="obj unknown entity type 'GPE'"):
        parse_dataset([_line(e2_type="GPE")], types=closed)
    assert len(parse_dataset([_line(e2_type="GPE")])) == 1


@pytest.mark.parametrize(
    "subj, obj, expected",
    [
        ((0, 1), (2, 3), []),
        ((1, 3), (2, 4), ["overlapping spans"]),
        ((2, 2), (0, 1), ["subj empty span"]),
        ((2, 1), (3, 4), ["subj inverted span"]),
        ((0, 1), (3, 5), ["obj span out of range"]),
        ((0, 1), (1, 2), []),
    ],
)
def test_validate_instance(
    subj: tuple[int, int], obj: tuple[int, int], expected: list[str]
) -> None:
    inst = make("i", ["a", "b", "c", "d"], (*subj, "ORG"), (*obj, "GPE"))
    assert validate_instance(inst) == expected


def test_validate_empty_tokens_and_bad_type() -> None:
    inst = make("i", [], (0, 1, "org"), (1, 2, "ORG"))
    violations = validate_instance(inst)
    assert "empty token sequence" in violations
    assert "subj malformed entity type 'org'" in violations


def test_round_trip(tmp_path: Path) -> None:
    instances = verb_corpus(12)
    path = tmp_path / "data.jsonl"
    assert write_dataset(path, instances) == 12
    assert list(read_dataset(path)) == instances
    lines = [dump_record(serialize_instance(inst)) for inst in instances]
    assert list(parse_dataset(lines)) == instances
    assert serialize_instance(instances[0]) == record(instances[0])


def test_inter_entity_distance() -> None:
    assert inter_entity_distance(EntitySpan(0, 1, "A"), EntitySpan(4, 6, "B")) == 3
    assert inter_entity_distance(EntitySpan(4, 6, "A"), EntitySpan(0, 1, "B")) == 3
    assert inter_entity_distance(EntitySpan(0, 2, "A"), EntitySpan(2, 3, "B")) == 0


def _stats_fixture() -> list[TokenizedInstance]:
    toks = ["w"] * 4
    return [
        make("1", toks, (0, 1, "PERS"), (2, 3, "TITLE"), "has_title"),
        make("2", toks, (0, 1, "PERS"), (2, 3, "TITLE"), "no_relation"),
        make("3", toks + ["w", "w"], (0, 1, "PERS"), (3, 4, "TITLE"), "has_title"),
        make("4", toks, (0, 1, "ORG"), (2, 3, "ORG"), "no_relation"),
        make("5", toks, (0, 1, "ORG"), (2, 3, "ORG"), "acquired_by"),
        make("6", toks, (0, 1, "DATE"), (2, 3, "ORG"), "no_relation"),
    ]


def test_compute_stats() -> None:
    stats = compute_stats(_stats_fixture())
    assert stats.instance_count == 6
    assert stats.pair_histogram == {
        EntityPairKey("PERS", "TITLE"): 3,
        EntityPairKey("ORG", "ORG"): 2,
        EntityPairKey("DATE", "ORG"): 1,
    }
    assert stats.relation_histogram == {
        "no_relation": 3,
        "has_title": 2,
        "acquired_by": 1,
    }
    assert stats.no_relation_fraction == 0.5
    assert stats.mean_sentence_length == pytest.approx(26 / 6)
    assert stats.mean_entity_distance == pytest.approx(7 / 6)
    assert sum(stats.pair_histogram.values()) == stats.instance_count
    assert sum(stats.relation_histogram.values()) == stats.instance_count

    rendered = stats.render()
    assert "no_relation fraction: 0.500" in rendered
    assert "PERS-TITLE" in rendered
    assert "─" * len("entity pair") in rendered
    assert "--" not in rendered
    assert stats.to_dict()["pair_histogram"]["PERS-TITLE"] == 3


def test_compute_stats_mean_length() -> None:
    data = [
        make("a", ["w"] * 4, (0, 1, "ORG"), (2, 3, "ORG"), "r"),
        make("b", ["w"] * 6, (0, 1, "ORG"), (2, 3, "ORG"), "r"),
    ]
    assert compute_stats(data).mean_sentence_length == 5.0


def test_compute_stats_permutation_invariant() -> None:
    data = verb_corpus(40, seed=3)
    shuffled = data[:]
    random.Random(0).shuffle(shuffled)
    assert compute_stats(data) == compute_stats(shuffled)


def test_compute_stats_errors() -> None:
    with pytest.raises(DataError, match="empty dataset"):
        compute_stats([])
    with pytest.raises(DataError, match="missing gold relation"):
        compute_stats([make("u", ["a", "b"], (0, 1, "ORG"), (1, 2, "ORG"))])
