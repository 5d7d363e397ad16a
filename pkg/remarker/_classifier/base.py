from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

from remarker._corpus import NO_RELATION, RelationLabel, is_no_relation
from remarker._errors import DataError
from remarker._utils import atomic_write

if TYPE_CHECKING:
    import os

    from remarker._markers import MarkedInstance, MarkerScheme


_SENTINEL_FLAG = "!"


@dataclass(frozen=True)
class LabelVocabulary:
    """
    Ordered relation labels. The position of a label is its class index, and
    argmax ties resolve to the lowest index.
    """

    labels: tuple[RelationLabel, ...]
    no_relation: str = NO_RELATION

    def __post_init__(self) -> None:
        if len(set(self.labels)) != len(self.labels):
            raise DataError("label vocabulary contains duplicates")
        sentinels = [
            lab for lab in self.labels if is_no_relation(lab, self.no_relation)
        ]
        if len(sentinels) > 1:
            raise DataError(f"more than one no-relation label: {sentinels}")

    @classmethod
    def from_labels(
        cls, labels: Iterable[str], no_relation: str = NO_RELATION
    ) -> LabelVocabulary:
        """Sorted, de-duplicated vocabulary over the given labels."""
        labels = sorted(set(labels))
        return cls(tuple(RelationLabel(lab) for lab in labels), no_relation)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[RelationLabel]:
        return iter(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self._index

    @cached_property
    def _index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise DataError(f"unknown label {label!r}") from None

    @property
    def sentinel(self) -> RelationLabel | None:
        """The label flagged as no-relation, if the vocabulary holds one."""
        return next(
            (lab for lab in self.labels if is_no_relation(lab, self.no_relation)), None
        )

    def restrict(self, labels: Iterable[str]) -> LabelVocabulary:
        """Order-preserving sub-vocabulary."""
        keep = set(labels)
        return LabelVocabulary(
            tuple(lab for lab in self.labels if lab in keep), self.no_relation
        )


def read_labels(
    path: str | os.PathLike[str], no_relation: str | None = None
) -> LabelVocabulary:
    """
    Read a label file: one label per line, the no-relation label flagged with a
    leading ``!``. Blank lines are ignored.
    """
    labels: list[RelationLabel] = []
    sentinel = no_relation
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            name = line.strip()
            if not name:
                continue
            if name.startswith(_SENTINEL_FLAG):
                name = name[len(_SENTINEL_FLAG) :].strip()
                if sentinel is not None and not is_no_relation(name, sentinel):
                    raise DataError(
                        f"second no-relation label {name!r}",
                        path=str(path),
                        line=lineno,
                    )
                sentinel = name
            labels.append(RelationLabel(name))
    if not labels:
        raise DataError("empty label vocabulary", path=str(path))
    return LabelVocabulary(tuple(labels), sentinel or NO_RELATION)


def format_labels(vocab: LabelVocabulary) -> str:
    return "".join(
        f"{_SENTINEL_FLAG if is_no_relation(lab, vocab.no_relation) else ''}{lab}\n"
        for lab in vocab
    )


def write_labels(path: str | os.PathLike[str], vocab: LabelVocabulary) -> None:
    with atomic_write(path) as f:
        f.write(format_labels(vocab))


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    label: RelationLabel
    #: Probabilities in vocabulary order; absent for label-only external sources.
    probabilities: tuple[float, ...] | None = None
    gold: RelationLabel | None = None


class Predictor(ABC):
    """
    Anything that maps marked instances to relation predictions.

    Implementations share the vocabulary order used for probability vectors and
    the marker scheme their inputs must carry.
    """

    @property
    @abstractmethod
    def vocabulary(self) -> LabelVocabulary:
        raise NotImplementedError

    @property
    @abstractmethod
    def scheme(self) -> MarkerScheme:
        raise NotImplementedError

    @abstractmethod
    def predict(self, marked: MarkedInstance) -> PredictionRecord:
        raise NotImplementedError

    def predict_many(self, data: Sequence[MarkedInstance]) -> list[PredictionRecord]:
        return [self.predict(m) for m in data]
