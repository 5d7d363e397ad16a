from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Any

from remarker._corpus import (
    Corpus,
    EntitySpan,
    FieldMapping,
    RelationLabel,
    TokenizedInstance,
    TypeVocabulary,
    parse_dataset,
    serialize_instance,
)
from remarker._errors import DataError, MarkerCollisionError, SchemeMismatchError

if TYPE_CHECKING:
    import os
    import sys

    if sys.version_info >= (3, 11):
        from typing import Self
    else:
        from typing_extensions import Self


SCHEME_KEY = "marker_scheme"

SUBJ_FENCE, SUBJ_TYPE_FENCE = "@", "*"
OBJ_FENCE, OBJ_TYPE_FENCE = "#", "^"
E1_OPEN, E1_CLOSE, E2_OPEN, E2_CLOSE = "[E1]", "[/E1]", "[E2]", "[/E2]"

_BRACKET_TOKENS = frozenset({E1_OPEN, E1_CLOSE, E2_OPEN, E2_CLOSE})
_TYPED_FENCES = ((SUBJ_FENCE, SUBJ_TYPE_FENCE), (OBJ_FENCE, OBJ_TYPE_FENCE))


# NOTE: Python 3.11+ introduces enum.StrEnum.
# After dropping Python 3.10 support, switch to stdlib StrEnum and remove the shim.
# See:
#   - https://docs.python.org/3/library/enum.html#enum.StrEnum
class MarkerScheme(str, Enum):
    TYPED_PUNCT = "typed-punct"
    ENTITY_MARKER = "entity-marker"
    ENTITY_MASK = "entity-mask"
    NONE = "none"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def from_name(cls, name: str | MarkerScheme) -> Self:
        """Accept ``typed-punct``, ``TYPED_PUNCT``, ``typed_punct`` and so on."""
        key = str(name).strip().lower().replace("_", "-")
        for scheme in cls:
            if scheme.value == key:
                return scheme
        raise DataError(
            f"unknown marker scheme {name!r} "
            f"(choose from {', '.join(s.value for s in cls)})"
        )

    @property
    def exposes_types(self) -> bool:
        """Whether entity types are visible in the marked token sequence."""
        return self in (MarkerScheme.TYPED_PUNCT, MarkerScheme.ENTITY_MASK)


def subj_mask_token(etype: str) -> str:
    return f"[SUBJ-{etype.upper()}]"


def obj_mask_token(etype: str) -> str:
    return f"[OBJ-{etype.upper()}]"


def _is_placeholder(token: str) -> bool:
    return token in _BRACKET_TOKENS or (
        token.startswith(("[SUBJ-", "[OBJ-")) and token.endswith("]")
    )


def _typed_opening_at(tokens: Sequence[str], i: int) -> bool:
    """Whether ``@ * <type> *`` or ``# ^ <type> ^`` starts at ``i``."""
    w = tokens[i : i + 4]
    return len(w) == 4 and any(
        w[0] == fence and w[1] == w[3] == type_fence
        for fence, type_fence in _TYPED_FENCES
    )


@dataclass(frozen=True)
class MarkedInstance:
    """
    Token sequence after a marker scheme was applied.

    ``subj`` and ``obj`` point at the original entity tokens inside
    :attr:`tokens` (at the single placeholder token for the mask scheme) and keep
    their entity types.
    """

    id: str
    tokens: tuple[str, ...]
    subj: EntitySpan
    obj: EntitySpan
    scheme: MarkerScheme
    relation: RelationLabel | None = None

    def to_record(self, mapping: FieldMapping | None = None) -> dict[str, Any]:
        record = serialize_instance(
            TokenizedInstance(self.id, self.tokens, self.subj, self.obj, self.relation),
            mapping,
        )
        record[SCHEME_KEY] = self.scheme.value
        return record


def marked_from_record(
    record: Mapping[str, Any], inst: TokenizedInstance
) -> MarkedInstance | None:
    """
    Rebuild a :class:`MarkedInstance` from a preprocessed record, or return
    :obj:`None` when the record was never marked.
    """
    scheme = record.get(SCHEME_KEY)
    if scheme is None:
        return None
    return MarkedInstance(
        inst.id,
        inst.tokens,
        inst.subj,
        inst.obj,
        MarkerScheme.from_name(scheme),
        inst.relation,
    )


def parse_marked_dataset(
    lines: Sequence[str],
    mapping: FieldMapping | None = None,
    *,
    strict: bool = True,
    types: TypeVocabulary | None = None,
    path: str | None = None,
) -> tuple[Corpus, list[MarkedInstance] | None]:
    """
    Parse interchange records that may have been written by ``preprocess``.

    Returns:
        The corpus, plus its marked instances when every record carries a
        marker scheme, or :obj:`None` when no record does.

    Raises:
        SchemeMismatchError: Only some records are marked, or schemes differ.
    """
    mapping = mapping or FieldMapping()
    corpus = parse_dataset(lines, mapping, strict=strict, types=types, path=path)
    records: dict[str, Mapping[str, Any]] = {}
    for line in lines:
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            continue
        if isinstance(record, dict) and SCHEME_KEY in record:
            records[str(record.get(mapping.id))] = record
    if not records:
        return corpus, None
    marked = [
        m
        for inst in corpus
        if (m := marked_from_record(records.get(inst.id, {}), inst)) is not None
    ]
    schemes = {m.scheme for m in marked}
    if len(marked) != len(corpus) or len(schemes) > 1:
        raise SchemeMismatchError(
            f"{path or 'input'}: records mix marker schemes "
            f"({sorted(s.value for s in schemes)} on {len(marked)} of "
            f"{len(corpus)} instances)"
        )
    return corpus, marked


def read_marked_dataset(
    path: str | os.PathLike[str],
    mapping: FieldMapping | None = None,
    *,
    strict: bool = True,
    types: TypeVocabulary | None = None,
) -> tuple[Corpus, list[MarkedInstance] | None]:
    with open(path, encoding="utf-8") as f:
        lines = f.readlines()
    return parse_marked_dataset(
        lines, mapping, strict=strict, types=types, path=str(path)
    )


def remap_span(
    original: EntitySpan, insertions: Sequence[tuple[int, int]]
) -> EntitySpan:
    """
    Follow a span through token insertions.

    Args:
        original: Span in the pre-insertion sequence.
        insertions:
            ``(position, width)`` pairs in pre-insertion coordinates. Each inserts
            ``width`` tokens in front of the token that was at ``position``.
            Insertions at ``original.start`` precede the span; insertions at
            ``original.end`` follow it.

    Raises:
        DataError: An insertion falls strictly inside the span.
    """
    shift = 0
    for pos, width in insertions:
        if original.start < pos < original.end:
            raise DataError(
                f"insertion at {pos} falls inside span "
                f"[{original.start}, {original.end})"
            )
        if pos <= original.start:
            shift += width
    return original.shifted(original.start + shift, original.end + shift)


def _is_marked(tokens: Sequence[str], span: EntitySpan) -> bool:
    """
    Whether a span is already marked. Bracket and mask tokens count anywhere in
    the span. Typed glyphs count only as a complete opening, inside the span or
    in front of it with the matching closing fence after it; lone glyphs are
    ordinary text.
    """
    start, end = span.start, span.end
    if any(_is_placeholder(t) for t in tokens[start:end]):
        return True
    if any(_typed_opening_at(tokens, i) for i in range(start, end - 3)):
        return True
    if end >= len(tokens):
        return False
    if start >= 4 and _typed_opening_at(tokens, start - 4):
        return tokens[end] == tokens[start - 4]
    if start > 0 and tokens[start - 1] in (E1_OPEN, E2_OPEN):
        return tokens[end] in (E1_CLOSE, E2_CLOSE)
    return False


def _check_collisions(inst: TokenizedInstance) -> None:
    if inst.subj.overlaps(inst.obj):
        raise MarkerCollisionError(
            "marker collision: subject and object spans overlap",
            instance_id=inst.id,
        )
    for role, span in (("subject", inst.subj), ("object", inst.obj)):
        if _is_marked(inst.tokens, span):
            raise MarkerCollisionError(
                f"marker collision: {role} span is already marked",
                instance_id=inst.id,
            )


def _enclose(
    inst: TokenizedInstance,
    subj_open: list[str],
    subj_close: list[str],
    obj_open: list[str],
    obj_close: list[str],
) -> tuple[list[str], EntitySpan, EntitySpan]:
    tokens = list(inst.tokens)
    # later-starting span first so the earlier span's indices stay valid
    runs = sorted(
        [(inst.subj, subj_open, subj_close), (inst.obj, obj_open, obj_close)],
        key=lambda r: r[0].start,
        reverse=True,
    )
    for span, opening, closing in runs:
        tokens[span.end : span.end] = closing
        tokens[span.start : span.start] = opening
    insertions = [
        (inst.subj.start, len(subj_open)),
        (inst.subj.end, len(subj_close)),
        (inst.obj.start, len(obj_open)),
        (inst.obj.end, len(obj_close)),
    ]
    return tokens, remap_span(inst.subj, insertions), remap_span(inst.obj, insertions)


def insert_markers(
    inst: TokenizedInstance, scheme: MarkerScheme | str = MarkerScheme.TYPED_PUNCT
) -> MarkedInstance:
    """
    Apply a marker scheme to an instance.

    With :attr:`MarkerScheme.TYPED_PUNCT` the subject becomes
    ``@ * <subj-type> * <subject tokens> @`` and the object
    ``# ^ <obj-type> ^ <object tokens> #``, each glyph and the lowercased type
    label being separate tokens.

    Raises:
        MarkerCollisionError:
            The spans overlap, or an entity span is already marked.
    """
    scheme = MarkerScheme.from_name(scheme)
    _check_collisions(inst)
    if scheme is MarkerScheme.NONE:
        return MarkedInstance(
            inst.id, inst.tokens, inst.subj, inst.obj, scheme, inst.relation
        )
    if scheme is MarkerScheme.ENTITY_MASK:
        return _mask(inst)
    if scheme is MarkerScheme.TYPED_PUNCT:
        s_type, o_type = inst.subj.etype.lower(), inst.obj.etype.lower()
        tokens, subj, obj = _enclose(
            inst,
            [SUBJ_FENCE, SUBJ_TYPE_FENCE, s_type, SUBJ_TYPE_FENCE],
            [SUBJ_FENCE],
            [OBJ_FENCE, OBJ_TYPE_FENCE, o_type, OBJ_TYPE_FENCE],
            [OBJ_FENCE],
        )
    else:
        tokens, subj, obj = _enclose(inst, [E1_OPEN], [E1_CLOSE], [E2_OPEN], [E2_CLOSE])
    return MarkedInstance(inst.id, tuple(tokens), subj, obj, scheme, inst.relation)


def _mask(inst: TokenizedInstance) -> MarkedInstance:
    tokens = list(inst.tokens)
    runs = [
        (inst.subj, subj_mask_token(inst.subj.etype)),
        (inst.obj, obj_mask_token(inst.obj.etype)),
    ]
    for span, token in sorted(runs, key=lambda r: r[0].start, reverse=True):
        tokens[span.start : span.end] = [token]
    # the earlier span collapses to one token, shifting the later one left
    if inst.subj.start < inst.obj.start:
        subj_at = inst.subj.start
        obj_at = inst.obj.start - (len(inst.subj) - 1)
    else:
        obj_at = inst.obj.start
        subj_at = inst.subj.start - (len(inst.obj) - 1)
    return MarkedInstance(
        inst.id,
        tuple(tokens),
        inst.subj.shifted(subj_at, subj_at + 1),
        inst.obj.shifted(obj_at, obj_at + 1),
        MarkerScheme.ENTITY_MASK,
        inst.relation,
    )


def strip_markers(marked: MarkedInstance) -> tuple[str, ...]:
    """
    Recover the source tokens of a marked instance.

    Only defined for schemes that keep the entity tokens (not the mask scheme).
    """
    if marked.scheme is MarkerScheme.NONE:
        return marked.tokens
    if marked.scheme is MarkerScheme.ENTITY_MASK:
        raise DataError("entity masks drop the entity tokens", instance_id=marked.id)
    if marked.scheme is MarkerScheme.ENTITY_MARKER:
        runs = [(marked.subj, 1, 1), (marked.obj, 1, 1)]
    else:
        runs = [(marked.subj, 4, 1), (marked.obj, 4, 1)]
    drop: set[int] = set()
    for span, before, after in runs:
        drop.update(range(span.start - before, span.start))
        drop.update(range(span.end, span.end + after))
    return tuple(t for i, t in enumerate(marked.tokens) if i not in drop)
