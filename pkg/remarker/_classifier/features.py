from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import sparse
from sklearn.feature_extraction import FeatureHasher

from remarker._corpus import inter_entity_distance

if TYPE_CHECKING:
    from remarker._classifier.softmax import TrainConfig
    from remarker._markers import MarkedInstance

_JOIN = "\x1f"
_MAX_DISTANCE_BUCKET = 6


@dataclass(frozen=True)
class FeatureVector:
    """Binary sparse vector: every listed index carries weight 1.0."""

    indices: tuple[int, ...]
    dim: int

    @property
    def weights(self) -> dict[int, float]:
        return dict.fromkeys(self.indices, 1.0)

    def __len__(self) -> int:
        return len(self.indices)


def distance_bucket(distance: int) -> int:
    """Logarithmic bucket: 0, 1, 2-3, 4-7, ... capped."""
    return min(int(distance).bit_length(), _MAX_DISTANCE_BUCKET)


def feature_strings(marked: MarkedInstance, ngrams: Sequence[int]) -> list[str]:
    """
    Named features of a marked instance: token n-grams over the whole marked
    sequence, the entity-type pair when the scheme makes types visible, and the
    inter-entity distance bucket. Duplicates are removed, order is stable.
    """
    tokens = [t.lower() for t in marked.tokens]
    names: dict[str, None] = {}
    for n in ngrams:
        for i in range(len(tokens) - n + 1):
            names[f"{n}g={_JOIN.join(tokens[i : i + n])}"] = None
    if marked.scheme.exposes_types:
        names[f"pair={marked.subj.etype}-{marked.obj.etype}"] = None
    bucket = distance_bucket(inter_entity_distance(marked.subj, marked.obj))
    names[f"dist={bucket}"] = None
    return list(names)


def _hasher(cfg: TrainConfig) -> FeatureHasher:
    return FeatureHasher(
        n_features=cfg.dim, input_type="string", alternate_sign=False
    )


def featurize_many(
    data: Sequence[MarkedInstance], cfg: TrainConfig
) -> sparse.csr_matrix:
    """Hash a batch into a binary CSR matrix of shape ``(len(data), cfg.dim)``."""
    x = _hasher(cfg).transform(feature_strings(m, cfg.ngrams) for m in data)
    x = sparse.csr_matrix(x, dtype=np.float64)
    x.sum_duplicates()
    # hash collisions inside one instance still count once
    x.data[:] = 1.0
    return x


def featurize(marked: MarkedInstance, cfg: TrainConfig) -> FeatureVector:
    row = featurize_many([marked], cfg)
    return FeatureVector(tuple(int(i) for i in np.sort(row.indices)), cfg.dim)
