from __future__ import annotations

import json
import random
from typing import TYPE_CHECKING

import pytest

from remarker._classifier.base import LabelVocabulary, PredictionRecord
from remarker._classifier.external import ExternalScoreFile
from remarker._corpus import RelationLabel, TokenizedInstance
from remarker._errors import DataError
from remarker._eval import (
    UNDEFINED,
    ComparisonRow,
    Metric,
    ModelComparison,
    Undefined,
    accuracy,
    align,
    compare_models,
    confusion,
    evaluate,
    format_metric,
    micro_f1,
    micro_prf,
    per_class_f1,
    per_pair_report,
    read_baselines,
    strict_f1,
    write_report,
)
from remarker._router import EntityPairKey, partition_dataset

from ._corpora import make

if TYPE_CHECKING:
    from pathlib import Path

NO = "no_relation"
GOLD = ["r1", "r1", "r2", NO, NO]
PRED = ["r1", "r2", "r2", NO, "r1"]


def test_confusion_matrix() -> None:
    cm = confusion(GOLD, PRED)
    assert list(cm.labels) == [NO, "r1", "r2"]
    assert cm["r1", "r2"] == 1
    assert cm[NO, "r1"] == 1
    assert cm.total == 5
    perfect = confusion(GOLD, GOLD)
    assert perfect.counts.trace() == perfect.total


def test_confusion_order_invariant() -> None:
    pairs = list(zip(GOLD, PRED))
    random.Random(1).shuffle(pairs)
    shuffled = confusion([g for g, _ in pairs], [p for _, p in pairs])
    assert (shuffled.counts == confusion(GOLD, PRED).counts).all()


def test_confusion_errors() -> None:
    with pytest.raises(DataError, match="length mismatch"):
        confusion(["a"], ["a", "b"])
    with pytest.raises(DataError, match="unknown label"):
        confusion(["a"], ["b"], LabelVocabulary.from_labels(["a"]))


def test_worked_example() -> None:
    cm = confusion(GOLD, PRED)
    assert accuracy(cm) == pytest.approx(0.6)
    p, r, f1 = micro_prf(cm)
    assert p == pytest.approx(2 / 4)
    assert r == pytest.approx(2 / 3)
    assert f1 == pytest.approx(0.5714, abs=1e-4)
    assert strict_f1(GOLD, PRED) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "gold, pred, expected",
    [
        (["A", "B", "A", "B"], ["A", "A", "A", "A"], 0.5),
        (["A", "B"], ["A", "B"], 1.0),
    ],
)
def test_accuracy(gold: list[str], pred: list[str], expected: float) -> None:
    assert accuracy(confusion(gold, pred)) == expected


def test_empty_matrix() -> None:
    cm = confusion([], [], LabelVocabulary.from_labels(["a"]))
    with pytest.raises(DataError, match="empty"):
        accuracy(cm)
    with pytest.raises(DataError, match="empty"):
        micro_f1(cm)


def test_micro_f1_edges() -> None:
    assert micro_f1(confusion(["r1", NO], ["r1", NO])) == 1.0
    assert micro_f1(confusion(["r1", "r2"], [NO, NO])) == 0.0
    assert micro_f1(confusion([NO, NO], [NO, NO])) is UNDEFINED
    assert micro_f1(confusion(["NA", "r1"], ["NA", "r1"]), "NA") == 1.0


def test_per_class_f1() -> None:
    cm = confusion(["A", "A", "B"], ["A", "B", "B"])
    scores = {s.label: s for s in per_class_f1(cm)}
    assert scores["A"].f1 == pytest.approx(2 / 3)
    assert scores["B"].f1 == pytest.approx(2 / 3)
    assert scores["A"].support == 2

    vocab = LabelVocabulary.from_labels(["A", "B", "C"])
    (_, _, c) = per_class_f1(confusion(["A", "B"], ["A", "B"], vocab))
    assert (c.label, c.f1, c.support, c.zero_support) == ("C", 0.0, 0, True)


def test_strict_f1() -> None:
    assert strict_f1([NO, NO], [NO, NO]) is UNDEFINED
    gold, pred = ["r1", NO, "r2"], ["r1", "r1", NO]
    assert strict_f1(gold, pred) == accuracy(confusion(gold, pred))
    assert strict_f1(GOLD, PRED, mode="micro") == micro_f1(confusion(GOLD, PRED))
    with pytest.raises(DataError, match="length mismatch"):
        strict_f1(["r1"], [])
    with pytest.raises(ValueError, match="strict mode"):
        strict_f1(GOLD, PRED, mode="macro")  # type: ignore[arg-type]


def _oracle(gold: list[str], pred: list[str]) -> dict[str, object]:
    n = len(gold)
    correct = sum(g == p for g, p in zip(gold, pred))
    tp = sum(g == p and g != NO for g, p in zip(gold, pred))
    pred_pos = sum(p != NO for p in pred)
    gold_pos = sum(g != NO for g in gold)
    if pred_pos == 0 and gold_pos == 0:
        f1: Metric = UNDEFINED
    else:
        prec = tp / pred_pos if pred_pos else 0.0
        rec = tp / gold_pos if gold_pos else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    classes = {}
    for lab in sorted(set(gold) | set(pred)):
        hit = sum(g == p == lab for g, p in zip(gold, pred))
        n_pred, n_gold = pred.count(lab), gold.count(lab)
        prec = hit / n_pred if n_pred else 0.0
        rec = hit / n_gold if n_gold else 0.0
        classes[lab] = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    kept = [(g, p) for g, p in zip(gold, pred) if not (g == NO and p == NO)]
    strict: Metric = sum(g == p for g, p in kept) / len(kept) if kept else UNDEFINED
    return {
        "accuracy": correct / n,
        "micro_f1": f1,
        "per_class": classes,
        "strict": strict,
    }


def _close(a: Metric, b: object) -> bool:
    if isinstance(a, Undefined) or isinstance(b, Undefined):
        return a is b
    assert isinstance(b, float)
    return abs(a - b) <= 1e-12


def test_metrics_match_brute_force_oracle() -> None:
    rng = random.Random(2024)
    for _ in range(1000):
        n = rng.randint(1, 200)
        labels = [NO, *(f"r{i}" for i in range(rng.randint(1, 21)))]
        gold = [rng.choice(labels) for _ in range(n)]
        if rng.random() < 0.3:
            pred = [g if rng.random() < 0.7 else rng.choice(labels) for g in gold]
        else:
            pred = [rng.choice(labels) for _ in range(n)]
        draw = rng.random()
        if draw < 0.1:
            # nothing left for the strict filter to drop
            pred = [labels[1] if g == p == NO else p for g, p in zip(gold, pred)]
        elif draw < 0.15:
            gold, pred = [NO] * n, [NO] * n
        report = evaluate(gold, pred)
        expected = _oracle(gold, pred)
        assert _close(report.accuracy, expected["accuracy"])
        assert _close(report.micro_f1, expected["micro_f1"])
        assert _close(report.strict_f1, expected["strict"])
        assert {s.label: s.f1 for s in report.per_class} == pytest.approx(
            expected["per_class"], abs=1e-12
        )

        acc, strict = report.accuracy, report.strict_f1
        if isinstance(strict, float):
            assert strict <= acc + 1e-12
        kept = sum(not (g == NO and p == NO) for g, p in zip(gold, pred))
        if kept == n:
            assert _close(strict, acc)
            assert _close(strict_f1(gold, pred, mode="micro"), report.micro_f1)
        elif kept == 0:
            assert strict is UNDEFINED

        padded = micro_f1(confusion([*gold, NO, NO], [*pred, NO, NO]))
        assert _close(padded, report.micro_f1)


def test_perfect_per_class() -> None:
    gold = ["a", "b", "b", NO, "c"]
    for s in evaluate(gold, gold).per_class:
        assert s.f1 == 1.0


def test_evaluate_report() -> None:
    report = evaluate(GOLD, PRED)
    assert report.instance_count == 5
    assert report.filtered_out == 1
    rendered = report.render()
    assert "accuracy:        0.6000" in rendered
    assert "micro F1:        0.5714" in rendered
    assert "strict F1:       0.5000 (accuracy, 1 filtered out)" in rendered
    assert "strict F1" not in report.render(strict=False)
    assert "label" not in report.render(per_class=False)

    undefined = evaluate([NO], [NO])
    assert "micro F1:        n/a" in undefined.render()
    doc = undefined.to_dict()
    assert doc["micro_f1"] is None
    assert doc["strict_f1"] is None


def test_format_metric() -> None:
    assert format_metric(0.75) == "0.75"
    assert format_metric(0.5714285, 4) == "0.5714"
    assert format_metric(UNDEFINED) == "n/a"
    assert format_metric(None) == "-"


def _gold(labels: list[str]) -> list[TokenizedInstance]:
    return [
        make(f"g{i}", ["a", "b", "c"], (0, 1, "ORG"), (2, 3, "ORG"), lab)
        for i, lab in enumerate(labels)
    ]


def _source(name: str, labels: list[str]) -> ExternalScoreFile:
    return ExternalScoreFile(
        name,
        tuple(
            PredictionRecord(f"g{i}", RelationLabel(lab))
            for i, lab in enumerate(labels)
        ),
    )


def test_align() -> None:
    gold = _gold(["r1", "r2"])
    records = [*_source("m", ["r2", "r1", "r1"])]
    assert align(gold, reversed(records)) == (["r1", "r2"], ["r2", "r1"])
    with pytest.raises(DataError, match="missing prediction") as e:
        align(gold, records[:1], source="m")
    assert e.value.instance_id == "g1"
    unlabeled = [make("g0", ["a", "b"], (0, 1, "ORG"), (1, 2, "ORG"))]
    with pytest.raises(DataError, match="missing gold relation"):
        align(unlabeled, records)


def test_comparison_row_rendering() -> None:
    row = ComparisonRow("XLNET-Base", 0.75, 0.79, 100)
    assert " ".join(row.cells()) == "XLNET-Base 0.75 0.79"
    table = ModelComparison((row,)).render().splitlines()
    assert table[0].split() == ["model", "micro", "F1", "accuracy"]
    assert table[2].split() == ["XLNET-Base", "0.75", "0.79"]
    undefined = ComparisonRow("empty", UNDEFINED, 1.0, 3)
    assert undefined.cells() == ["empty", "n/a", "1.00"]


def test_compare_models() -> None:
    gold_labels = ["r1", "r1", "r2", NO, NO]
    gold = _gold(gold_labels)
    sources = [
        _source("perfect", gold_labels),
        _source("worked", ["r1", "r2", "r2", NO, "r1"]),
        _source("silent", [NO] * 5),
    ]
    cmp = compare_models(sources, gold)
    assert [r.name for r in cmp.rows] == ["perfect", "worked", "silent"]
    assert cmp.row("perfect").micro_f1 == 1.0
    worked = cmp.row("worked")
    assert worked.micro_f1 == pytest.approx(4 / 7)
    assert worked.accuracy == pytest.approx(0.6)
    assert cmp.row("silent").micro_f1 == 0.0
    assert cmp.row("silent").accuracy == pytest.approx(0.4)

    reordered = compare_models(sources[::-1], gold)
    for row in cmp.rows:
        assert reordered.row(row.name) == row

    twins = compare_models([sources[1], _source("twin", PRED)], gold)
    assert twins.rows[0].cells()[1:] == twins.rows[1].cells()[1:]


def test_compare_models_coverage_gap() -> None:
    gold = _gold(["r1", "r2", NO])
    with pytest.raises(DataError, match="short: missing prediction") as e:
        compare_models([_source("short", ["r1", "r2"])], gold)
    assert e.value.instance_id == "g2"


def test_compare_models_all_no_relation() -> None:
    cmp = compare_models([_source("m", [NO, NO])], _gold([NO, NO]))
    assert cmp.rows[0].micro_f1 is UNDEFINED
    assert "n/a" in cmp.render()


def test_class_grid() -> None:
    vocab = LabelVocabulary.from_labels(["r1", "r2", "r3", NO])
    gold = _gold(["r1", "r2", NO])
    cmp = compare_models(
        [_source("A", ["r1", "r2", NO]), _source("B", ["r1", "r1", NO])],
        gold,
        vocabulary=vocab,
        per_class=True,
    )
    grid = cmp.render_class_grid().splitlines()
    assert grid[0].split() == ["class", "A", "B"]
    rows = {line.split()[0]: line.split()[1:] for line in grid[2:-1]}
    assert rows["r1"] == ["1.00", "0.67"]
    assert rows["r2"] == ["1.00", "0.00"]
    assert rows["r3"] == ["*", "0.00", "0.00"]
    assert grid[-1] == "* zero support"
    with pytest.raises(ValueError, match="per-class"):
        compare_models([_source("A", ["r1", "r2", NO])], gold).render_class_grid()


def _pair_fixture() -> tuple[list[TokenizedInstance], list[PredictionRecord]]:
    gold = [
        make("d0", ["a", "b", "c"], (0, 1, "ORG"), (2, 3, "DATE"), "founded_on"),
        make("d1", ["a", "b", "c"], (0, 1, "ORG"), (2, 3, "DATE"), NO),
        make("t0", ["a", "b", "c"], (0, 1, "PERS"), (2, 3, "TITLE"), "has_title"),
        make("t1", ["a", "b", "c"], (0, 1, "PERS"), (2, 3, "TITLE"), "has_title"),
        make("x0", ["a", "b", "c"], (0, 1, "GPE"), (2, 3, "ORG"), "r1"),
    ]
    preds = ["founded_on", NO, "founder_of", "founder_of", "r1"]
    records = [
        PredictionRecord(inst.id, RelationLabel(p)) for inst, p in zip(gold, preds)
    ]
    return gold, records


def test_per_pair_report() -> None:
    gold, records = _pair_fixture()
    report = per_pair_report(
        partition_dataset(gold),
        records,
        baselines={EntityPairKey("ORG", "DATE"): 0.81},
    )
    assert [r.name for r in report.rows] == ["PERS-TITLE", "ORG-DATE", "GPE-ORG"]
    assert report.row("ORG-DATE").cells(True) == ["ORG-DATE", "1.00", "1.00", "0.81"]
    assert report.row("PERS-TITLE").cells(True) == ["PERS-TITLE", "0.00", "0.00", "-"]
    assert report.row("GPE-ORG").count == 1
    lines = report.render().splitlines()
    assert lines[0].split() == ["entity", "pair", "micro", "F1", "accuracy"] + [
        "baseline",
        "F1",
    ]


def test_per_pair_report_single_key_matches_global() -> None:
    gold, records = _pair_fixture()
    gold, records = gold[:2], records[:2]
    report = per_pair_report(partition_dataset(gold), records)
    (row,) = report.rows
    g, p = align(gold, records)
    assert row.micro_f1 == micro_f1(confusion(g, p))
    assert row.accuracy == accuracy(confusion(g, p))


def test_per_pair_report_missing_prediction() -> None:
    gold, records = _pair_fixture()
    with pytest.raises(DataError, match="missing prediction") as e:
        per_pair_report(partition_dataset(gold), records[:-1])
    assert e.value.instance_id == "x0"


def test_read_baselines(tmp_path: Path) -> None:
    path = tmp_path / "baselines.tsv"
    path.write_text("# pair\tF1\nORG-DATE\t0.81\n\nPERS-TITLE\t0.9\n", encoding="utf-8")
    assert read_baselines(path) == {
        EntityPairKey("ORG", "DATE"): 0.81,
        EntityPairKey("PERS", "TITLE"): 0.9,
    }


@pytest.mark.parametrize(
    "text, match",
    [
        ("ORG-DATE 0.81\n", "malformed baseline line"),
        ("ORG\t0.5\n", "malformed baseline line"),
        ("ORG-DATE\tabc\n", "malformed baseline line"),
        ("ORG-DATE\t1.5\n", "outside"),
    ],
)
def test_read_baselines_errors(tmp_path: Path, text: str, match: str) -> None:
    path = tmp_path / "baselines.tsv"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(DataError, match=match) as e:
        read_baselines(path)
    assert e.value.line == 1


def test_write_report(tmp_path: Path) -> None:
    gold, records = _pair_fixture()
    report = evaluate(*align(gold, records))
    by_pair = per_pair_report(partition_dataset(gold), records)
    path = tmp_path / "report.json"
    write_report(path, report, {"command": "evaluate"}, by_pair=by_pair)
    doc = json.loads(path.read_text(encoding="utf-8"))
    assert doc["metadata"] == {"command": "evaluate"}
    assert doc["accuracy"] == report.accuracy
    assert doc["instance_count"] == 5
    assert [r["name"] for r in doc["by_pair"]["rows"]] == [
        "PERS-TITLE",
        "ORG-DATE",
        "GPE-ORG",
    ]
