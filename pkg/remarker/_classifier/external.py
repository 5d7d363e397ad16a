from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from remarker._classifier.base import LabelVocabulary, PredictionRecord
from remarker._corpus import RelationLabel
from remarker._errors import DataError
from remarker._utils import atomic_write

if TYPE_CHECKING:
    import os

ID_COLUMN, LABEL_COLUMN = "id", "label"
_ARGMAX_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ExternalScoreFile:
    """Predictions of one model (native or external) keyed by instance id."""

    name: str
    records: tuple[PredictionRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PredictionRecord]:
        return iter(self.records)

    def by_id(self) -> dict[str, PredictionRecord]:
        return {r.id: r for r in self.records}


def _parse_probabilities(
    cells: Sequence[str], row: int, path: str
) -> tuple[float, ...]:
    try:
        probs = tuple(float(c) for c in cells)
    except ValueError as e:
        raise DataError(f"malformed probability ({e})", path=path, row=row) from e
    if any(not math.isfinite(p) or p < 0 for p in probs):
        raise DataError(
            "probabilities must be finite and non-negative", path=path, row=row
        )
    return probs


def load_external_predictions(
    path: str | os.PathLike[str],
    vocabulary: LabelVocabulary | None = None,
    name: str | None = None,
) -> ExternalScoreFile:
    """
    Read a prediction TSV with header ``id<TAB>label[<TAB>p_0 ... p_{k-1}]``.

    Row numbers in diagnostics count the header as row 1.

    Args:
        path: The file to read.
        vocabulary:
            Labels the predictions must come from. Probability columns, when
            present, follow this order. Without it neither labels nor
            probabilities are checked.
        name: Model name for reports; defaults to the file stem.

    Raises:
        DataError: Malformed row, unknown label or duplicate id.
    """
    where = str(path)
    records: list[PredictionRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter="\t")
        header = next(reader, None)
        if header is None or header[:2] != [ID_COLUMN, LABEL_COLUMN]:
            raise DataError(
                f"header must start with {ID_COLUMN!r}, {LABEL_COLUMN!r}",
                path=where,
                row=1,
            )
        n_probs = len(header) - 2
        if n_probs and vocabulary is not None and n_probs != len(vocabulary):
            raise DataError(
                f"{n_probs} probability columns for {len(vocabulary)} labels",
                path=where,
                row=1,
            )
        for row, cells in enumerate(reader, 2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataError(
                    f"malformed row: expected {len(header)} columns, got {len(cells)}",
                    path=where,
                    row=row,
                )
            pid, label = cells[0], cells[1]
            if not pid:
                raise DataError("malformed row: empty id", path=where, row=row)
            if pid in seen:
                raise DataError(
                    "duplicate prediction id", path=where, row=row, instance_id=pid
                )
            if vocabulary is not None and label not in vocabulary:
                raise DataError(f"unknown label {label!r}", path=where, row=row)
            probs = _parse_probabilities(cells[2:], row, where) if n_probs else None
            if (
                probs is not None
                and vocabulary is not None
                and max(probs) - probs[vocabulary.index(label)] > _ARGMAX_TOLERANCE
            ):
                raise DataError(
                    f"label {label!r} is not the most probable", path=where, row=row
                )
            seen.add(pid)
            records.append(PredictionRecord(pid, RelationLabel(label), probs))
    return ExternalScoreFile(name or Path(path).stem, tuple(records))


def write_predictions(
    path: str | os.PathLike[str],
    records: Iterable[PredictionRecord],
    vocabulary: LabelVocabulary | None = None,
    with_probabilities: bool = False,
) -> None:
    """Write records in the prediction TSV format, atomically."""
    if with_probabilities and vocabulary is None:
        raise ValueError("probability columns need a label vocabulary")
    with atomic_write(path) as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        header = [ID_COLUMN, LABEL_COLUMN]
        if with_probabilities:
            assert vocabulary is not None
            header += [f"p_{i}" for i in range(len(vocabulary))]
        writer.writerow(header)
        for rec in records:
            cells = [rec.id, str(rec.label)]
            if with_probabilities:
                if rec.probabilities is None:
                    raise DataError("record has no probabilities", instance_id=rec.id)
                cells += [repr(float(p)) for p in rec.probabilities]
            writer.writerow(cells)
