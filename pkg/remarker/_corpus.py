from __future__ import annotations

import json
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field, fields
from typing import TYPE_CHECKING, Any, overload

from remarker import _log
from remarker._errors import DataError
from remarker._log import Glyph
from remarker._utils import atomic_write

if TYPE_CHECKING:
    import os

    from remarker._router import EntityPairKey


NO_RELATION = "no_relation"

#: Entity types of the eight dataset pairs, in table order of first appearance.
DEFAULT_ENTITY_TYPES: tuple[str, ...] = (
    "ORG",
    "GPE",
    "PERS",
    "TITLE",
    "DATE",
    "MONEY",
    "UNIV",
    "GOV_AGY",
)
DEFAULT_TYPE_ALIASES: dict[str, str] = {
    "PERSON": "PERS",
    "PER": "PERS",
    "GOV": "GOV_AGY",
}


class RelationLabel(str):
    """
    A relation name. Behaves as a plain string; :attr:`is_no_relation` compares
    case-insensitively against the ``no_relation`` sentinel.
    """

    __slots__ = ()

    @property
    def is_no_relation(self) -> bool:
        return self.lower() == NO_RELATION


def is_no_relation(label: str, sentinel: str = NO_RELATION) -> bool:
    return label.lower() == sentinel.lower()


@dataclass(frozen=True)
class TypeVocabulary:
    """
    Entity-type names with spelling aliases.

    With ``closed=False`` (default) any well-formed type is accepted and the
    listed names only seed orderings and aliases.
    """

    names: tuple[str, ...] = DEFAULT_ENTITY_TYPES
    aliases: Mapping[str, str] = field(
        default_factory=lambda: dict(DEFAULT_TYPE_ALIASES)
    )
    closed: bool = False

    def normalize(self, raw: str) -> str:
        name = "_".join(str(raw).split()).upper()
        return self.aliases.get(name, name)

    def accepts(self, name: str) -> bool:
        return not self.closed or name in self.names


@dataclass(frozen=True)
class EntitySpan:
    """Half-open token interval ``[start, end)`` with its entity type."""

    start: int
    end: int
    etype: str

    def __len__(self) -> int:
        return self.end - self.start

    def overlaps(self, other: EntitySpan) -> bool:
        return self.start < other.end and other.start < self.end

    def shifted(self, start: int, end: int) -> EntitySpan:
        return EntitySpan(start, end, self.etype)


@dataclass(frozen=True)
class TokenizedInstance:
    id: str
    tokens: tuple[str, ...]
    subj: EntitySpan
    obj: EntitySpan
    relation: RelationLabel | None = None

    def surface(self, span: EntitySpan) -> tuple[str, ...]:
        return self.tokens[span.start : span.end]


@dataclass(frozen=True)
class FieldMapping:
    """Source-record keys for each :class:`TokenizedInstance` field."""

    id: str = "id"
    tokens: str = "token"
    subj_start: str = "e1_start"
    subj_end: str = "e1_end"
    subj_type: str = "e1_type"
    obj_start: str = "e2_start"
    obj_end: str = "e2_end"
    obj_type: str = "e2_type"
    relation: str = "rel_group"
    #: Source files store ``end`` as the index of the last entity token.
    inclusive_end: bool = False

    def __post_init__(self) -> None:
        keys = self.keys()
        if any(not k for k in keys):
            raise DataError("field mapping keys must be non-empty")
        if len(set(keys)) != len(keys):
            dup = sorted(k for k, n in Counter(keys).items() if n > 1)
            raise DataError(f"field mapping keys must be distinct, got {dup}")

    def keys(self) -> list[str]:
        return [getattr(self, name) for name in _KEY_FIELDS]

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> FieldMapping:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise DataError(f"unknown field mapping entries: {unknown}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | os.PathLike[str]) -> FieldMapping:
        with open(path, encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise DataError(f"malformed field map: {e}", path=str(path)) from e
        if not isinstance(data, dict):
            raise DataError("field map must be a JSON object", path=str(path))
        return cls.from_dict(data)


_KEY_FIELDS = tuple(
    f.name for f in fields(FieldMapping) if f.name != "inclusive_end"
)


@dataclass(frozen=True)
class SkippedRecord:
    line: int
    reason: str


@dataclass(frozen=True)
class Corpus(Sequence[TokenizedInstance]):
    """Parsed instances in input order, plus lines skipped in lenient mode."""

    instances: tuple[TokenizedInstance, ...]
    skipped: tuple[SkippedRecord, ...] = ()

    @overload
    def __getitem__(self, index: int) -> TokenizedInstance: ...
    @overload
    def __getitem__(self, index: slice) -> Sequence[TokenizedInstance]: ...
    def __getitem__(
        self, index: int | slice
    ) -> TokenizedInstance | Sequence[TokenizedInstance]:
        return self.instances[index]

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[TokenizedInstance]:
        return iter(self.instances)


def validate_instance(
    inst: TokenizedInstance, types: TypeVocabulary | None = None
) -> list[str]:
    """
    Check an instance against the schema invariants.

    Returns:
        Every violated invariant as a short message; an empty list means the
        instance is valid.
    """
    violations: list[str] = []
    n = len(inst.tokens)
    if n == 0:
        violations.append("empty token sequence")
    for role, span in (("subj", inst.subj), ("obj", inst.obj)):
        if span.start == span.end:
            violations.append(f"{role} empty span")
        elif span.start > span.end:
            violations.append(f"{role} inverted span")
        if span.start < 0 or span.end > n or span.start > n:
            violations.append(f"{role} span out of range")
        if not span.etype or span.etype != span.etype.upper() or any(
            c.isspace() for c in span.etype
        ):
            violations.append(f"{role} malformed entity type {span.etype!r}")
        elif types is not None and not types.accepts(span.etype):
            violations.append(f"{role} unknown entity type {span.etype!r}")
    if (
        inst.subj.start < inst.subj.end
        and inst.obj.start < inst.obj.end
        and inst.subj.overlaps(inst.obj)
    ):
        violations.append("overlapping spans")
    return violations


def _record_to_instance(
    record: Mapping[str, Any], mapping: FieldMapping, types: TypeVocabulary
) -> TokenizedInstance:
    for key in mapping.keys():
        if key == mapping.relation:
            continue
        if key not in record:
            raise DataError(f"missing mapped key {key!r}")
    tokens = record[mapping.tokens]
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise DataError(f"{mapping.tokens!r} must be an array of strings")
    offset = 1 if mapping.inclusive_end else 0
    try:
        subj = EntitySpan(
            int(record[mapping.subj_start]),
            int(record[mapping.subj_end]) + offset,
            types.normalize(record[mapping.subj_type]),
        )
        obj = EntitySpan(
            int(record[mapping.obj_start]),
            int(record[mapping.obj_end]) + offset,
            types.normalize(record[mapping.obj_type]),
        )
    except (TypeError, ValueError) as e:
        raise DataError(f"span offsets must be integers ({e})") from e
    relation = record.get(mapping.relation)
    return TokenizedInstance(
        id=str(record[mapping.id]),
        tokens=tuple(tokens),
        subj=subj,
        obj=obj,
        relation=None if relation is None else RelationLabel(relation),
    )


def parse_dataset(
    source: Iterable[str],
    mapping: FieldMapping | None = None,
    *,
    strict: bool = True,
    types: TypeVocabulary | None = None,
    path: str | None = None,
) -> Corpus:
    """
    Parse a line-delimited JSON record stream into validated instances.

    Args:
        source: Lines of the interchange format (e.g. an open text file).
        mapping: Source-key layout. Defaults to the dataset's native keys.
        strict:
            If :obj:`True`, the first bad line raises :class:`DataError`.
            Otherwise bad lines are logged and returned in :attr:`Corpus.skipped`.
        types: Entity-type vocabulary used to normalize and check types.
        path: Source name used in diagnostics.
    """
    mapping = mapping or FieldMapping()
    types = types or TypeVocabulary()
    instances: list[TokenizedInstance] = []
    skipped: list[SkippedRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(source, 1):
        if not line.strip():
            continue
        try:
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"malformed record ({e.msg})") from e
            if not isinstance(record, dict):
                raise DataError("record must be a JSON object")
            inst = _record_to_instance(record, mapping, types)
            if violations := validate_instance(inst, types):
                raise DataError("; ".join(violations), instance_id=inst.id)
            if inst.id in seen:
                raise DataError("duplicate instance id", instance_id=inst.id)
        except DataError as e:
            if strict:
                raise DataError(
                    e.reason, path=path, line=lineno, instance_id=e.instance_id
                ) from e
            skipped.append(SkippedRecord(lineno, e.reason))
            _log.warn(f"Skipping line {lineno}: {e.reason}")
            continue
        seen.add(inst.id)
        instances.append(inst)
    return Corpus(tuple(instances), tuple(skipped))


def read_dataset(
    path: str | os.PathLike[str],
    mapping: FieldMapping | None = None,
    *,
    strict: bool = True,
    types: TypeVocabulary | None = None,
) -> Corpus:
    with open(path, encoding="utf-8") as f:
        return parse_dataset(f, mapping, strict=strict, types=types, path=str(path))


def serialize_instance(
    inst: TokenizedInstance, mapping: FieldMapping | None = None
) -> dict[str, Any]:
    """Inverse of parsing a single record."""
    mapping = mapping or FieldMapping()
    offset = 1 if mapping.inclusive_end else 0
    record: dict[str, Any] = {
        mapping.id: inst.id,
        mapping.tokens: list(inst.tokens),
        mapping.subj_start: inst.subj.start,
        mapping.subj_end: inst.subj.end - offset,
        mapping.subj_type: inst.subj.etype,
        mapping.obj_start: inst.obj.start,
        mapping.obj_end: inst.obj.end - offset,
        mapping.obj_type: inst.obj.etype,
    }
    if inst.relation is not None:
        record[mapping.relation] = str(inst.relation)
    return record


def dump_record(record: Mapping[str, Any]) -> str:
    return json.dumps(record, ensure_ascii=False)


def write_dataset(
    path: str | os.PathLike[str],
    instances: Iterable[TokenizedInstance],
    mapping: FieldMapping | None = None,
) -> int:
    """Write instances in the interchange format, atomically. Returns the count."""
    n = 0
    with atomic_write(path) as f:
        for inst in instances:
            f.write(dump_record(serialize_instance(inst, mapping)))
            f.write("\n")
            n += 1
    return n


def labeled(instances: Iterable[TokenizedInstance]) -> list[TokenizedInstance]:
    """Return the instances, raising if any lacks a gold relation."""
    out = list(instances)
    for inst in out:
        if inst.relation is None:
            raise DataError("missing gold relation", instance_id=inst.id)
    return out


def inter_entity_distance(subj: EntitySpan, obj: EntitySpan) -> int:
    """Number of tokens strictly between two disjoint spans."""
    first, second = (subj, obj) if subj.start <= obj.start else (obj, subj)
    return max(0, second.start - first.end)


@dataclass(frozen=True)
class DatasetStats:
    instance_count: int
    relation_histogram: dict[str, int]
    pair_histogram: dict[EntityPairKey, int]
    no_relation_fraction: float
    mean_sentence_length: float
    mean_entity_distance: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "instance_count": self.instance_count,
            "relation_histogram": dict(self.relation_histogram),
            "pair_histogram": {str(k): v for k, v in self.pair_histogram.items()},
            "no_relation_fraction": self.no_relation_fraction,
            "mean_sentence_length": self.mean_sentence_length,
            "mean_entity_distance": self.mean_entity_distance,
        }

    def render(self) -> str:
        lines = [
            f"instances: {self.instance_count}",
            f"no_relation fraction: {self.no_relation_fraction:.3f}",
            f"mean sentence length: {self.mean_sentence_length:.2f} tokens",
            f"mean inter-entity distance: {self.mean_entity_distance:.2f} tokens",
            "",
            _two_column_table(
                "entity pair",
                "count",
                [(str(k), v) for k, v in self.pair_histogram.items()],
            ),
            "",
            _two_column_table(
                "relation", "count", list(self.relation_histogram.items())
            ),
        ]
        return "\n".join(lines)


def _two_column_table(left: str, right: str, rows: list[tuple[str, int]]) -> str:
    w = max([len(left), *(len(name) for name, _ in rows)])
    rw = max([len(right), *(len(str(n)) for _, n in rows)])
    out = [f"{left:<{w}}  {right:>{rw}}", f"{Glyph.H * w}  {Glyph.H * rw}"]
    out += [f"{name:<{w}}  {n:>{rw}}" for name, n in rows]
    return "\n".join(out)


def compute_stats(
    instances: Iterable[TokenizedInstance], no_relation: str = NO_RELATION
) -> DatasetStats:
    """
    Histograms and aggregates over a labeled dataset.

    Histograms are ordered by descending count, ties broken by name, so the
    result does not depend on instance order.
    """
    from remarker._router import pair_key

    data = labeled(instances)
    if not data:
        raise DataError("empty dataset")
    relations = Counter(str(inst.relation) for inst in data)
    pairs = Counter(pair_key(inst) for inst in data)
    n = len(data)
    no_rel = sum(c for r, c in relations.items() if is_no_relation(r, no_relation))
    return DatasetStats(
        instance_count=n,
        relation_histogram=dict(
            sorted(relations.items(), key=lambda kv: (-kv[1], kv[0]))
        ),
        pair_histogram=dict(
            sorted(pairs.items(), key=lambda kv: (-kv[1], str(kv[0])))
        ),
        no_relation_fraction=no_rel / n,
        mean_sentence_length=sum(len(inst.tokens) for inst in data) / n,
        mean_entity_distance=sum(
            inter_entity_distance(inst.subj, inst.obj) for inst in data
        )
        / n,
    )
