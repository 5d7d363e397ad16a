from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Literal

import numpy as np
from sklearn.metrics import confusion_matrix

from remarker import _log
from remarker._classifier.base import LabelVocabulary, PredictionRecord
from remarker._corpus import NO_RELATION, TokenizedInstance, is_no_relation
from remarker._errors import DataError
from remarker._log import Glyph
from remarker._router import EntityPairKey, Partition, pair_key
from remarker._utils import atomic_write

if TYPE_CHECKING:
    import os

    from numpy.typing import NDArray

    from remarker._classifier.external import ExternalScoreFile


class Undefined(Enum):
    """A metric whose denominator is empty. Never coerced to zero."""

    UNDEFINED = "n/a"

    def __str__(self) -> str:
        return self.value


UNDEFINED = Undefined.UNDEFINED

# NOTE: Python 3.12+ (PEP 695) supports type statement.
# After dropping Python 3.11 support, update this to use that instead.
Metric = float | Undefined
StrictMode = Literal["accuracy", "micro"]
STRICT_MODES: tuple[StrictMode, ...] = ("accuracy", "micro")


def format_metric(value: Metric | None, digits: int = 2) -> str:
    if value is None:
        return "-"
    if value is UNDEFINED:
        return str(UNDEFINED)
    return f"{value:.{digits}f}"


def _jsonable(value: Metric | None) -> float | None:
    return None if value is None or value is UNDEFINED else float(value)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts of (gold, predicted) label pairs; rows are gold labels."""

    labels: LabelVocabulary
    counts: NDArray[np.int64]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __getitem__(self, key: tuple[str, str]) -> int:
        g, p = key
        return int(self.counts[self.labels.index(g), self.labels.index(p)])

    def _sentinel_index(self, no_relation: str | None) -> int | None:
        sentinel = no_relation or self.labels.no_relation
        return next(
            (i for i, lab in enumerate(self.labels) if is_no_relation(lab, sentinel)),
            None,
        )


def _check_lengths(gold: Sequence[str], pred: Sequence[str]) -> None:
    if len(gold) != len(pred):
        raise DataError(
            f"length mismatch: {len(gold)} gold labels, {len(pred)} predictions"
        )


def confusion(
    gold: Sequence[str],
    pred: Sequence[str],
    vocabulary: LabelVocabulary | None = None,
    no_relation: str = NO_RELATION,
) -> ConfusionMatrix:
    """
    Build the gold-by-predicted count matrix.

    Args:
        gold: Gold labels.
        pred: Predicted labels, aligned with ``gold``.
        vocabulary:
            Row and column order. Defaults to the sorted union of both sequences.
        no_relation: Sentinel used when the vocabulary is derived.

    Raises:
        DataError: The sequences differ in length or hold an unknown label.
    """
    _check_lengths(gold, pred)
    vocab = vocabulary or LabelVocabulary.from_labels([*gold, *pred], no_relation)
    k = len(vocab)
    if not gold:
        return ConfusionMatrix(vocab, np.zeros((k, k), dtype=np.int64))
    y_true = np.array([vocab.index(g) for g in gold])
    y_pred = np.array([vocab.index(p) for p in pred])
    counts = confusion_matrix(y_true, y_pred, labels=np.arange(k))
    return ConfusionMatrix(vocab, counts.astype(np.int64))


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise DataError("accuracy of an empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total


def micro_prf(
    cm: ConfusionMatrix, no_relation: str | None = None
) -> tuple[Metric, Metric, Metric]:
    """
    Micro precision, recall and F1 with the no-relation label excluded as a
    positive class.

    A no-relation gold instance predicted as a relation counts only as a
    false positive. All three values are :data:`UNDEFINED` when there is neither
    a relation in the gold labels nor among the predictions.
    """
    if cm.total == 0:
        raise DataError("micro F1 of an empty confusion matrix")
    s = cm._sentinel_index(no_relation)
    c = cm.counts
    correct = int(np.trace(c))
    pred_pos, gold_pos = cm.total, cm.total
    if s is not None:
        correct -= int(c[s, s])
        pred_pos -= int(c[:, s].sum())
        gold_pos -= int(c[s, :].sum())
    if pred_pos == 0 and gold_pos == 0:
        return UNDEFINED, UNDEFINED, UNDEFINED
    precision = correct / pred_pos if pred_pos else 0.0
    recall = correct / gold_pos if gold_pos else 0.0
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def micro_f1(cm: ConfusionMatrix, no_relation: str | None = None) -> Metric:
    return micro_prf(cm, no_relation)[2]


@dataclass(frozen=True)
class ClassScore:
    label: str
    f1: float
    support: int
    precision: float = 0.0
    recall: float = 0.0

    @property
    def zero_support(self) -> bool:
        return self.support == 0


def per_class_f1(cm: ConfusionMatrix) -> list[ClassScore]:
    """One-vs-rest scores per label; empty denominators score 0."""
    c = cm.counts
    scores = []
    for i, lab in enumerate(cm.labels):
        tp = int(c[i, i])
        predicted, support = int(c[:, i].sum()), int(c[i, :].sum())
        p = tp / predicted if predicted else 0.0
        r = tp / support if support else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        scores.append(ClassScore(str(lab), f1, support, p, r))
    return scores


def strict_filter(
    gold: Sequence[str], pred: Sequence[str], no_relation: str = NO_RELATION
) -> tuple[list[str], list[str]]:
    """Drop every instance whose gold and prediction are both no-relation."""
    _check_lengths(gold, pred)
    kept = [
        (g, p)
        for g, p in zip(gold, pred)
        if not (is_no_relation(g, no_relation) and is_no_relation(p, no_relation))
    ]
    return [g for g, _ in kept], [p for _, p in kept]


def strict_f1(
    gold: Sequence[str],
    pred: Sequence[str],
    no_relation: str = NO_RELATION,
    mode: StrictMode = "accuracy",
) -> Metric:
    """
    F1 after removing the correctly predicted no-relation instances.

    With ``mode="accuracy"`` the remainder is scored by micro F1 over all
    classes, which for single-label data equals accuracy on the remainder. With
    ``mode="micro"`` it is scored by the no-relation-excluded micro F1.

    Returns:
        The score, or :data:`UNDEFINED` when nothing remains.
    """
    if mode not in STRICT_MODES:
        raise ValueError(f"unknown strict mode {mode!r}")
    g, p = strict_filter(gold, pred, no_relation)
    if not g:
        return UNDEFINED
    if mode == "accuracy":
        return sum(a == b for a, b in zip(g, p)) / len(g)
    return micro_f1(confusion(g, p, no_relation=no_relation), no_relation)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    micro_precision: Metric
    micro_recall: Metric
    micro_f1: Metric
    strict_f1: Metric
    per_class: tuple[ClassScore, ...]
    instance_count: int
    #: Instances removed by the strict filter (correct no-relation predictions).
    filtered_out: int
    strict_mode: StrictMode = "accuracy"

    def headline(self) -> str:
        return (
            f"micro F1 {format_metric(self.micro_f1, 4)}, "
            f"accuracy {format_metric(self.accuracy, 4)}, "
            f"strict F1 {format_metric(self.strict_f1, 4)}"
        )

    def render(self, per_class: bool = True, strict: bool = True) -> str:
        lines = [
            f"instances:       {self.instance_count}",
            f"accuracy:        {format_metric(self.accuracy, 4)}",
            f"micro precision: {format_metric(self.micro_precision, 4)}",
            f"micro recall:    {format_metric(self.micro_recall, 4)}",
            f"micro F1:        {format_metric(self.micro_f1, 4)}",
        ]
        if strict:
            lines.append(
                f"strict F1:       {format_metric(self.strict_f1, 4)} "
                f"({self.strict_mode}, {self.filtered_out} filtered out)"
            )
        if per_class:
            w = max([5, *(len(s.label) for s in self.per_class)])
            lines += ["", f"{'label':<{w}}  {'F1':>6}  {'support':>7}"]
            lines.append(f"{Glyph.H * w}  {Glyph.H * 6}  {Glyph.H * 7}")
            lines += [
                f"{s.label:<{w}}  {s.f1:>6.4f}  {s.support:>7}"
                f"{'  (zero support)' if s.zero_support else ''}"
                for s in self.per_class
            ]
        return "\n".join(lines)

    def to_dict(self) -> dict[str, Any]:
        return {
            "instance_count": self.instance_count,
            "accuracy": self.accuracy,
            "micro_precision": _jsonable(self.micro_precision),
            "micro_recall": _jsonable(self.micro_recall),
            "micro_f1": _jsonable(self.micro_f1),
            "strict_f1": _jsonable(self.strict_f1),
            "strict_mode": self.strict_mode,
            "filtered_out": self.filtered_out,
            "per_class": [
                {
                    "label": s.label,
                    "f1": s.f1,
                    "precision": s.precision,
                    "recall": s.recall,
                    "support": s.support,
                    "zero_support": s.zero_support,
                }
                for s in self.per_class
            ],
        }


def evaluate(
    gold: Sequence[str],
    pred: Sequence[str],
    vocabulary: LabelVocabulary | None = None,
    no_relation: str = NO_RELATION,
    strict_mode: StrictMode = "accuracy",
) -> EvalReport:
    cm = confusion(gold, pred, vocabulary, no_relation)
    p, r, f1 = micro_prf(cm, no_relation)
    kept, _ = strict_filter(gold, pred, no_relation)
    return EvalReport(
        accuracy=accuracy(cm),
        micro_precision=p,
        micro_recall=r,
        micro_f1=f1,
        strict_f1=strict_f1(gold, pred, no_relation, strict_mode),
        per_class=tuple(per_class_f1(cm)),
        instance_count=cm.total,
        filtered_out=len(gold) - len(kept),
        strict_mode=strict_mode,
    )


def align(
    gold: Sequence[TokenizedInstance],
    predictions: Iterable[PredictionRecord],
    source: str = "predictions",
) -> tuple[list[str], list[str]]:
    """
    Pair gold relations with predicted labels by instance id, in gold order.

    Raises:
        DataError: A gold instance has no prediction, or lacks a gold relation.
    """
    by_id = {rec.id: rec for rec in predictions}
    gold_labels, pred_labels = [], []
    for inst in gold:
        if inst.relation is None:
            raise DataError("missing gold relation", instance_id=inst.id)
        rec = by_id.get(inst.id)
        if rec is None:
            raise DataError(f"{source}: missing prediction", instance_id=inst.id)
        gold_labels.append(str(inst.relation))
        pred_labels.append(str(rec.label))
    if extra := len(by_id) - len(gold_labels):
        _log.warn(f"{source}: ignoring {extra} prediction(s) without a gold instance")
    return gold_labels, pred_labels


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    micro_f1: Metric
    accuracy: float
    count: int
    baseline: float | None = None

    def cells(self, with_baseline: bool = False) -> list[str]:
        out = [self.name, format_metric(self.micro_f1), format_metric(self.accuracy)]
        if with_baseline:
            out.append(format_metric(self.baseline))
        return out


@dataclass(frozen=True)
class ModelComparison:
    """
    Rows of (name, micro F1, accuracy), one per model or per entity pair, with
    optional per-class F1 columns and a baseline column.
    """

    rows: tuple[ComparisonRow, ...]
    key_header: str = "model"
    per_class: dict[str, tuple[ClassScore, ...]] = field(default_factory=dict)
    labels: tuple[str, ...] = ()

    @property
    def has_baseline(self) -> bool:
        return any(r.baseline is not None for r in self.rows)

    def row(self, name: str) -> ComparisonRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def render(self) -> str:
        header = [self.key_header, "micro F1", "accuracy"]
        if self.has_baseline:
            header.append("baseline F1")
        table = [header, *(r.cells(self.has_baseline) for r in self.rows)]
        return _render_table(table)

    def render_class_grid(self) -> str:
        """Classes as rows, models as columns; zero-support classes are starred."""
        if not self.per_class:
            raise ValueError("comparison was built without per-class scores")
        names = list(self.per_class)
        scores = {n: {s.label: s for s in self.per_class[n]} for n in names}
        table = [["class", *names]]
        starred = False
        for lab in self.labels:
            zero = all(scores[n][lab].zero_support for n in names)
            starred |= zero
            table.append(
                [f"{lab}{' *' if zero else ''}"]
                + [format_metric(scores[n][lab].f1) for n in names]
            )
        out = _render_table(table)
        return f"{out}\n* zero support" if starred else out

    def to_dict(self) -> dict[str, Any]:
        return {
            "key": self.key_header,
            "rows": [
                {
                    "name": r.name,
                    "micro_f1": _jsonable(r.micro_f1),
                    "accuracy": r.accuracy,
                    "count": r.count,
                    "baseline": r.baseline,
                }
                for r in self.rows
            ],
            "per_class": {
                name: [
                    {"label": s.label, "f1": s.f1, "support": s.support}
                    for s in scores
                ]
                for name, scores in self.per_class.items()
            },
        }


def _render_table(table: list[list[str]]) -> str:
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    lines = [
        " ".join(
            cell.ljust(w) if i == 0 else cell.rjust(w)
            for i, (cell, w) in enumerate(zip(row, widths))
        ).rstrip()
        for row in table
    ]
    lines.insert(1, " ".join(Glyph.H * w for w in widths))
    return "\n".join(lines)


def read_baselines(path: str | os.PathLike[str]) -> dict[EntityPairKey, float]:
    """
    Read ``pair-key<TAB>baseline-F1`` lines. Blank lines and lines starting with
    ``#`` are ignored.
    """
    out: dict[EntityPairKey, float] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.rstrip("\r\n").split("\t")
            try:
                if len(parts) != 2:
                    raise ValueError(f"expected 2 columns, got {len(parts)}")
                key, value = EntityPairKey.parse(parts[0]), float(parts[1])
            except (ValueError, DataError) as e:
                raise DataError(
                    f"malformed baseline line ({e})", path=str(path), line=lineno
                ) from e
            if not 0.0 <= value <= 1.0:
                raise DataError(
                    f"baseline F1 {value} outside [0, 1]", path=str(path), line=lineno
                )
            out[key] = value
    return out


def per_pair_report(
    partition: Partition[TokenizedInstance],
    predictions: Iterable[PredictionRecord],
    baselines: Mapping[EntityPairKey, float] | None = None,
    vocabulary: LabelVocabulary | None = None,
    no_relation: str = NO_RELATION,
) -> ModelComparison:
    """
    Micro F1 and accuracy per entity pair, configured keys first, then any
    residual pairs.

    Raises:
        DataError: An instance of the partition has no prediction.
    """
    by_id = {r.id: r for r in predictions}
    groups: dict[EntityPairKey, list[TokenizedInstance]] = {
        k: list(b) for k, b in partition.buckets.items()
    }
    for inst in partition.residual:
        groups.setdefault(pair_key(inst), []).append(inst)
    baselines = baselines or {}
    rows = []
    for key, insts in groups.items():
        own = [by_id[inst.id] for inst in insts if inst.id in by_id]
        gold, pred = align(insts, own, source=str(key))
        cm = confusion(gold, pred, vocabulary, no_relation)
        rows.append(
            ComparisonRow(
                str(key),
                micro_f1(cm, no_relation),
                accuracy(cm),
                cm.total,
                baselines.get(key),
            )
        )
    return ModelComparison(tuple(rows), key_header="entity pair")


def compare_models(
    sources: Sequence[ExternalScoreFile],
    gold: Sequence[TokenizedInstance],
    vocabulary: LabelVocabulary | None = None,
    no_relation: str = NO_RELATION,
    per_class: bool = False,
) -> ModelComparison:
    """
    Score several prediction sources against one gold set.

    Each row depends only on its own source: the label order is the given
    vocabulary or the sorted union of every label seen.

    Raises:
        DataError: A source misses a gold instance.
    """
    aligned = [
        (src.name, *align(gold, src.records, source=src.name)) for src in sources
    ]
    if vocabulary is None:
        seen = {lab for _, g, p in aligned for lab in (*g, *p)}
        vocabulary = LabelVocabulary.from_labels(seen, no_relation)
    rows = []
    class_scores: dict[str, tuple[ClassScore, ...]] = {}
    for name, g, p in aligned:
        cm = confusion(g, p, vocabulary, no_relation)
        rows.append(
            ComparisonRow(name, micro_f1(cm, no_relation), accuracy(cm), cm.total)
        )
        if per_class:
            class_scores[name] = tuple(per_class_f1(cm))
    return ModelComparison(
        tuple(rows),
        per_class=class_scores,
        labels=tuple(str(lab) for lab in vocabulary) if per_class else (),
    )


def write_report(
    path: str | os.PathLike[str],
    report: EvalReport | ModelComparison,
    metadata: Mapping[str, Any] | None = None,
    **extra: EvalReport | ModelComparison,
) -> None:
    """Write one JSON document with the report, named extra sections and metadata."""
    doc: dict[str, Any] = {"metadata": dict(metadata or {}), **report.to_dict()}
    for name, section in extra.items():
        doc[name] = section.to_dict()
    with atomic_write(path) as f:
        json.dump(doc, f, indent=2, sort_keys=False)
        f.write("\n")
