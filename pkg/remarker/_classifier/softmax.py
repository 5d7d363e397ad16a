from __future__ import annotations

import hashlib
import json
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy import sparse
from scipy.special import logsumexp
from scipy.special import softmax as _softmax

from remarker._classifier.base import (
    LabelVocabulary,
    PredictionRecord,
    Predictor,
)
from remarker._classifier.features import featurize_many
from remarker._errors import (
    ConfigError,
    DegenerateLabelSetError,
    SchemeMismatchError,
)
from remarker._markers import MarkerScheme
from remarker._watch import EpochWatch

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from remarker._markers import MarkedInstance


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of the native softmax classifier."""

    batch_size: int = 8
    epochs: int = 5
    #: Initial step size, decayed as ``learning_rate / sqrt(t)`` over SGD steps.
    learning_rate: float = 0.1
    l2: float = 1e-6
    seed: int = 42
    #: Size of the hashed feature space. Must be a power of two.
    dim: int = 1 << 20
    ngrams: tuple[int, ...] = (1, 2)

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.l2 < 0:
            raise ConfigError(f"L2 strength must be >= 0, got {self.l2}")
        if self.dim < 1 or self.dim & (self.dim - 1):
            raise ConfigError(
                f"hashing dimension must be a power of two, got {self.dim}"
            )
        if not self.ngrams or any(n < 1 for n in self.ngrams):
            raise ConfigError(f"n-gram orders must be positive, got {self.ngrams}")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["ngrams"] = list(self.ngrams)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TrainConfig:
        data = dict(data)
        if "ngrams" in data:
            data["ngrams"] = tuple(int(n) for n in data["ngrams"])
        return cls(**data)


def softmax(scores: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.asarray(_softmax(scores, axis=-1), dtype=np.float64)


def loss_and_gradient(
    weights: NDArray[np.float64],
    bias: NDArray[np.float64],
    x: sparse.spmatrix | NDArray[np.float64],
    y: NDArray[np.int64],
    l2: float,
) -> tuple[float, NDArray[np.float64], NDArray[np.float64]]:
    """
    Mean cross-entropy plus ``l2 / 2 * ||W||^2`` and its gradient.

    Args:
        weights: ``(n_labels, n_features)`` weight matrix.
        bias: ``(n_labels,)`` bias vector, not regularized.
        x: ``(n, n_features)`` feature matrix, dense or sparse.
        y: Gold class indices of length ``n``.
        l2: Regularization strength.

    Returns:
        ``(loss, grad_weights, grad_bias)``.
    """
    n = x.shape[0]
    scores = np.asarray(x @ weights.T) + bias
    log_norm = logsumexp(scores, axis=1)
    rows = np.arange(n)
    loss = float(np.mean(log_norm - scores[rows, y])) + 0.5 * l2 * float(
        np.sum(weights * weights)
    )
    g = np.exp(scores - log_norm[:, None])
    g[rows, y] -= 1.0
    g /= n
    grad_w = np.asarray(x.T @ g).T + l2 * weights
    return loss, grad_w, g.sum(axis=0)


@dataclass(frozen=True, eq=False)
class SoftmaxModel(Predictor):
    """
    Sparse linear multiclass model over hashed features.

    Only hashed indices seen during training get a weight column
    (:attr:`columns`); every other index has weight zero.
    """

    labels: LabelVocabulary
    marker_scheme: MarkerScheme
    config: TrainConfig
    columns: NDArray[np.int64]
    weights: NDArray[np.float64]
    bias: NDArray[np.float64]
    #: Mean training objective after each epoch.
    history: tuple[float, ...] = field(default=())

    @property
    def vocabulary(self) -> LabelVocabulary:
        return self.labels

    @property
    def scheme(self) -> MarkerScheme:
        return self.marker_scheme

    @classmethod
    def zeros(
        cls, labels: LabelVocabulary, scheme: MarkerScheme, config: TrainConfig
    ) -> SoftmaxModel:
        return cls(
            labels,
            scheme,
            config,
            np.zeros(0, dtype=np.int64),
            np.zeros((len(labels), 0)),
            np.zeros(len(labels)),
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([list(self.labels), self.labels.no_relation]).encode())
        h.update(self.marker_scheme.value.encode())
        h.update(json.dumps(self.config.to_dict(), sort_keys=True).encode())
        for arr in (self.columns, self.weights, self.bias):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def _project(self, x: sparse.csr_matrix) -> sparse.csr_matrix:
        """Keep the columns this model has weights for, in model order."""
        x = x.tocoo()
        pos = np.searchsorted(self.columns, x.col)
        pos = np.minimum(pos, max(len(self.columns) - 1, 0))
        hit = (
            self.columns[pos] == x.col
            if len(self.columns)
            else np.zeros(len(x.col), dtype=bool)
        )
        return sparse.csr_matrix(
            (x.data[hit], (x.row[hit], pos[hit])),
            shape=(x.shape[0], len(self.columns)),
        )

    def _check_scheme(self, data: Sequence[MarkedInstance]) -> None:
        for m in data:
            if m.scheme is not self.marker_scheme:
                raise SchemeMismatchError(
                    f"instance {m.id!r} was marked with {m.scheme.value}, "
                    f"model expects {self.marker_scheme.value}"
                )

    def predict_proba(self, data: Sequence[MarkedInstance]) -> NDArray[np.float64]:
        self._check_scheme(data)
        if not data:
            return np.zeros((0, len(self.labels)))
        x = self._project(featurize_many(data, self.config))
        return softmax(np.asarray(x @ self.weights.T) + self.bias)

    def predict(self, marked: MarkedInstance) -> PredictionRecord:
        return self.predict_many([marked])[0]

    def predict_many(self, data: Sequence[MarkedInstance]) -> list[PredictionRecord]:
        probs = self.predict_proba(data)
        # argmax returns the first maximum: ties go to the lowest label index
        best = np.argmax(probs, axis=1) if len(data) else []
        return [
            PredictionRecord(
                m.id,
                self.labels.labels[int(k)],
                tuple(float(p) for p in row),
                m.relation,
            )
            for m, k, row in zip(data, best, probs)
        ]


def predict(model: Predictor, marked: MarkedInstance) -> PredictionRecord:
    """Softmax over per-label scores; the most probable label wins."""
    return model.predict(marked)


def train(
    data: Sequence[tuple[MarkedInstance, str]],
    cfg: TrainConfig | None = None,
    vocabulary: LabelVocabulary | None = None,
    label: str = "softmax",
) -> SoftmaxModel:
    """
    Fit a :class:`SoftmaxModel` by mini-batch SGD.

    Each epoch visits the data in an order drawn from a generator seeded with
    ``cfg.seed``, so identical inputs give bitwise-identical models.

    Args:
        data: ``(marked instance, gold label)`` pairs sharing one marker scheme.
        cfg: Hyper-parameters; defaults to :class:`TrainConfig()`.
        vocabulary:
            Label order for the model. Defaults to the sorted gold labels.
        label: Name used in progress logs.

    Raises:
        DegenerateLabelSetError: Fewer than two distinct gold labels.
        SchemeMismatchError: The instances carry different marker schemes.
    """
    cfg = cfg or TrainConfig()
    gold = [str(lab) for _, lab in data]
    if len(set(gold)) < 2:
        raise DegenerateLabelSetError(
            "degenerate label set: need at least two distinct labels, "
            f"got {sorted(set(gold))}"
        )
    schemes = {m.scheme for m, _ in data}
    if len(schemes) > 1:
        raise SchemeMismatchError(
            "mixed marker schemes in training data: "
            f"{sorted(s.value for s in schemes)}"
        )
    scheme = schemes.pop()
    vocab = vocabulary or LabelVocabulary.from_labels(gold)
    y = np.array([vocab.index(g) for g in gold], dtype=np.int64)

    x_full = featurize_many([m for m, _ in data], cfg)
    columns = np.unique(x_full.indices).astype(np.int64)
    model = SoftmaxModel(
        vocab,
        scheme,
        cfg,
        columns,
        np.zeros((len(vocab), len(columns))),
        np.zeros(len(vocab)),
    )
    x = model._project(x_full)

    weights, bias = model.weights, model.bias
    rng = np.random.default_rng(cfg.seed)
    n, step = len(data), 0
    history: list[float] = []
    epochs = EpochWatch(range(cfg.epochs), label=label)
    for _ in epochs:
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            step += 1
            lr = cfg.learning_rate / np.sqrt(step)
            _, grad_w, grad_b = loss_and_gradient(weights, bias, x[idx], y[idx], cfg.l2)
            weights -= lr * grad_w
            bias -= lr * grad_b
        loss, _, _ = loss_and_gradient(weights, bias, x, y, cfg.l2)
        history.append(loss)
        epochs.record(loss=loss)
    return SoftmaxModel(vocab, scheme, cfg, columns, weights, bias, tuple(history))
