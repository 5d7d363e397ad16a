from remarker._classifier.base import (
    LabelVocabulary,
    PredictionRecord,
    Predictor,
    format_labels,
    read_labels,
    write_labels,
)
from remarker._classifier.external import (
    ExternalScoreFile,
    load_external_predictions,
    write_predictions,
)
from remarker._classifier.features import FeatureVector, featurize, featurize_many
from remarker._classifier.persist import load_model, save_model
from remarker._classifier.softmax import (
    SoftmaxModel,
    TrainConfig,
    loss_and_gradient,
    predict,
    train,
)

__all__ = [
    "ExternalScoreFile",
    "FeatureVector",
    "LabelVocabulary",
    "PredictionRecord",
    "Predictor",
    "SoftmaxModel",
    "TrainConfig",
    "featurize",
    "featurize_many",
    "format_labels",
    "load_external_predictions",
    "load_model",
    "loss_and_gradient",
    "predict",
    "read_labels",
    "save_model",
    "train",
    "write_labels",
    "write_predictions",
]
