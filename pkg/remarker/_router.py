from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Generic, Protocol, TypeVar

import numpy as np

from remarker import _log
from remarker._classifier.base import LabelVocabulary, PredictionRecord, Predictor
from remarker._classifier.persist import load_model, save_model
from remarker._classifier.softmax import SoftmaxModel, TrainConfig, train
from remarker._corpus import EntitySpan, RelationLabel
from remarker._errors import ArtifactError, DataError
from remarker._log import Glyph
from remarker._utils import atomic_write

if TYPE_CHECKING:
    import os

    from remarker._markers import MarkedInstance, MarkerScheme


class _HasSpans(Protocol):
    @property
    def subj(self) -> EntitySpan: ...
    @property
    def obj(self) -> EntitySpan: ...


# NOTE: Python 3.12+ (PEP 695) supports inline type parameter syntax.
# After dropping Python 3.11 support, update this to use that instead.
# See:
#   - https://peps.python.org/pep-0695/
T = TypeVar("T", bound=_HasSpans)


@dataclass(frozen=True, order=True)
class EntityPairKey:
    """Direction-sensitive (subject type, object type) routing key."""

    subj_type: str
    obj_type: str

    def __str__(self) -> str:
        return f"{self.subj_type}-{self.obj_type}".upper()

    @classmethod
    def parse(cls, text: str) -> EntityPairKey:
        """
        Parse ``"PERS-GOV_AGY"`` style keys. The first hyphen separates the two
        types, so only the object type may contain one.
        """
        parts = text.strip().upper().split("-", 1)
        if len(parts) != 2 or not all(parts):
            raise DataError(f"malformed entity pair key {text!r}")
        return cls(parts[0], parts[1])


#: The eight dataset pairs, in table order.
DEFAULT_PAIR_KEYS: tuple[EntityPairKey, ...] = tuple(
    EntityPairKey.parse(k)
    for k in (
        "ORG-GPE",
        "ORG-ORG",
        "PERS-TITLE",
        "ORG-DATE",
        "PERS-ORG",
        "ORG-MONEY",
        "PERS-UNIV",
        "PERS-GOV_AGY",
    )
)


def pair_key(inst: _HasSpans) -> EntityPairKey:
    return EntityPairKey(inst.subj.etype.upper(), inst.obj.etype.upper())


@dataclass(frozen=True)
class Partition(Generic[T]):
    """
    Instances split by pair key. Keys outside the configured set land in
    :attr:`residual`; every bucket keeps input order.
    """

    buckets: dict[EntityPairKey, tuple[T, ...]]
    residual: tuple[T, ...] = ()
    keys: tuple[EntityPairKey, ...] = DEFAULT_PAIR_KEYS

    def __len__(self) -> int:
        return sum(len(b) for b in self.buckets.values()) + len(self.residual)

    def census(self) -> dict[EntityPairKey, int]:
        """Instance count per key, configured keys first, residual keys after."""
        counts = {k: len(b) for k, b in self.buckets.items()}
        for inst in self.residual:
            k = pair_key(inst)
            counts[k] = counts.get(k, 0) + 1
        return counts

    def render_census(self) -> str:
        rows = [
            (f"{k}{'' if k in self.buckets else ' (residual)'}", n)
            for k, n in self.census().items()
        ]
        w = max([len("entity pair"), *(len(name) for name, _ in rows)])
        lines = [f"{'entity pair':<{w}}  count", f"{Glyph.H * w}  {Glyph.H * 5}"]
        lines += [f"{name:<{w}}  {n:>5}" for name, n in rows]
        return "\n".join(lines)


def partition_dataset(
    instances: Iterable[T], keyset: Sequence[EntityPairKey] = DEFAULT_PAIR_KEYS
) -> Partition[T]:
    keys = tuple(keyset)
    buckets: dict[EntityPairKey, list[T]] = {}
    residual: list[T] = []
    allowed = set(keys)
    for inst in instances:
        k = pair_key(inst)
        if k in allowed:
            buckets.setdefault(k, []).append(inst)
        else:
            residual.append(inst)
    ordered = {k: tuple(buckets[k]) for k in keys if k in buckets}
    return Partition(ordered, tuple(residual), keys)


def merge_predictions(
    per_bucket: Mapping[Any, Sequence[PredictionRecord]],
    reference_ids: Sequence[str] | None = None,
) -> list[PredictionRecord]:
    """
    Flatten per-bucket predictions.

    Args:
        per_bucket: Records of each bucket; the key is only used in messages.
        reference_ids:
            Original dataset order. When given, the result follows it and must
            cover it exactly. Otherwise buckets are concatenated as given.

    Raises:
        DataError: An id appears twice, is missing, or is not in the reference.
    """
    by_id: dict[str, PredictionRecord] = {}
    for bucket, records in per_bucket.items():
        for rec in records:
            if rec.id in by_id:
                raise DataError(
                    f"duplicate prediction (bucket {bucket})", instance_id=rec.id
                )
            by_id[rec.id] = rec
    if reference_ids is None:
        return list(by_id.values())
    missing = [i for i in reference_ids if i not in by_id]
    if missing:
        raise DataError(
            f"missing prediction for {len(missing)} instance(s)",
            instance_id=missing[0],
        )
    if len(by_id) != len(reference_ids):
        extra = sorted(set(by_id) - set(reference_ids))
        raise DataError("prediction for unknown instance", instance_id=extra[0])
    return [by_id[i] for i in reference_ids]


_ROUTES_FILE = "routes.json"
_FALLBACK_FILE = "fallback.rmk"
_ROUTES_VERSION = 2


@dataclass(frozen=True, eq=False)
class PairRoutedClassifier(Predictor):
    """
    One :class:`SoftmaxModel` per entity pair key plus a global fallback model
    for residual pairs and for buckets too small to train on.
    """

    labels: LabelVocabulary
    fallback: SoftmaxModel
    models: dict[EntityPairKey, SoftmaxModel] = field(default_factory=dict)
    keys: tuple[EntityPairKey, ...] = DEFAULT_PAIR_KEYS

    @property
    def vocabulary(self) -> LabelVocabulary:
        return self.labels

    @property
    def scheme(self) -> MarkerScheme:
        return self.fallback.scheme

    def route(self, marked: MarkedInstance) -> SoftmaxModel:
        return self.models.get(pair_key(marked), self.fallback)

    def _expand(self, rec: PredictionRecord, model: SoftmaxModel) -> PredictionRecord:
        if rec.probabilities is None or model.labels == self.labels:
            return rec
        probs = np.zeros(len(self.labels))
        for lab, p in zip(model.labels, rec.probabilities):
            probs[self.labels.index(lab)] = p
        return PredictionRecord(
            rec.id, rec.label, tuple(float(p) for p in probs), rec.gold
        )

    def predict(self, marked: MarkedInstance) -> PredictionRecord:
        model = self.route(marked)
        return self._expand(model.predict(marked), model)

    def predict_many(self, data: Sequence[MarkedInstance]) -> list[PredictionRecord]:
        groups: dict[EntityPairKey | str, list[MarkedInstance]] = {}
        for m in data:
            k = pair_key(m)
            groups.setdefault(k if k in self.models else "fallback", []).append(m)
        per_bucket: dict[EntityPairKey | str, list[PredictionRecord]] = {}
        for k, batch in groups.items():
            model = self.models[k] if isinstance(k, EntityPairKey) else self.fallback
            per_bucket[k] = [self._expand(r, model) for r in model.predict_many(batch)]
        return merge_predictions(per_bucket, [m.id for m in data])

    @classmethod
    def fit(
        cls,
        data: Sequence[tuple[MarkedInstance, str]],
        cfg: TrainConfig | None = None,
        keys: Sequence[EntityPairKey] = DEFAULT_PAIR_KEYS,
        vocabulary: LabelVocabulary | None = None,
        jobs: int = 1,
    ) -> PairRoutedClassifier:
        """
        Train the fallback on all data and one model per non-degenerate bucket.

        Per-key models are independent and share the seed, so results do not
        depend on ``jobs``.
        """
        cfg = cfg or TrainConfig()
        vocab = vocabulary or LabelVocabulary.from_labels(str(g) for _, g in data)
        partition = partition_dataset((_Pair(m, str(g)) for m, g in data), keys)
        if len(partition.residual):
            _log.warn(
                f"{len(partition.residual)} instance(s) outside the configured keys "
                "will be served by the fallback model"
            )
        trainable: dict[EntityPairKey, list[tuple[MarkedInstance, str]]] = {}
        for key in keys:
            bucket = [(p.marked, p.gold) for p in partition.buckets.get(key, ())]
            if len({g for _, g in bucket}) < 2:
                _log.warn(
                    f"Bucket {key} has {len(bucket)} instance(s) and fewer than two "
                    "labels; routing it to the fallback model"
                )
                continue
            trainable[key] = bucket

        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            fallback_future = pool.submit(train, data, cfg, vocab, "softmax <fallback>")
            futures = {
                key: pool.submit(
                    train,
                    bucket,
                    cfg,
                    vocab.restrict(g for _, g in bucket),
                    f"softmax <{key}>",
                )
                for key, bucket in trainable.items()
            }
            models = {key: f.result() for key, f in futures.items()}
            fallback = fallback_future.result()
        return cls(vocab, fallback, models, tuple(keys))

    def save(self, path: str | os.PathLike[str]) -> None:
        """Write the routed model as a directory of artifacts plus an index."""
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        routes = []
        for key, model in self.models.items():
            name = f"{key}.rmk"
            save_model(model, root / name)
            routes.append([key.subj_type, key.obj_type, name])
        save_model(self.fallback, root / _FALLBACK_FILE)
        index = {
            "version": _ROUTES_VERSION,
            "labels": list(self.labels),
            "no_relation": self.labels.no_relation,
            "keys": [[k.subj_type, k.obj_type] for k in self.keys],
            "routes": routes,
            "fallback": _FALLBACK_FILE,
        }
        with atomic_write(root / _ROUTES_FILE) as f:
            json.dump(index, f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike[str]) -> PairRoutedClassifier:
        root = Path(path)
        try:
            with open(root / _ROUTES_FILE, encoding="utf-8") as f:
                index = json.load(f)
        except json.JSONDecodeError as e:
            raise ArtifactError(f"{root / _ROUTES_FILE}: malformed index ({e})") from e
        if index.get("version", 0) > _ROUTES_VERSION:
            raise ArtifactError(
                f"{root / _ROUTES_FILE}: routes version {index['version']} is newer "
                f"than supported version {_ROUTES_VERSION}"
            )
        try:
            labels = LabelVocabulary(
                tuple(RelationLabel(lab) for lab in index["labels"]),
                index["no_relation"],
            )
            fallback = index["fallback"]
            keys = tuple(_key_from_json(k) for k in index["keys"])
            entries = index["routes"]
            if isinstance(entries, dict):
                # version 1 keyed routes by "SUBJ-OBJ" strings
                routes = {EntityPairKey.parse(k): name for k, name in entries.items()}
            else:
                routes = {EntityPairKey(str(s), str(o)): name for s, o, name in entries}
        except (KeyError, TypeError, ValueError) as e:
            raise ArtifactError(f"{root / _ROUTES_FILE}: bad index entry ({e})") from e
        models = {k: load_model(root / name) for k, name in routes.items()}
        return cls(labels, load_model(root / fallback), models, keys)


def _key_from_json(value: str | list[str]) -> EntityPairKey:
    if isinstance(value, str):
        return EntityPairKey.parse(value)
    subj, obj = value
    return EntityPairKey(str(subj), str(obj))


@dataclass(frozen=True)
class _Pair:
    """A training example routed by the spans of its marked instance."""

    marked: MarkedInstance
    gold: str

    @property
    def subj(self) -> EntitySpan:
        return self.marked.subj

    @property
    def obj(self) -> EntitySpan:
        return self.marked.obj


def is_routed_model(path: str | os.PathLike[str]) -> bool:
    return (Path(path) / _ROUTES_FILE).is_file()
