from remarker._classifier import (
    ExternalScoreFile,
    LabelVocabulary,
    PredictionRecord,
    Predictor,
    SoftmaxModel,
    TrainConfig,
    load_external_predictions,
    load_model,
    predict,
    read_labels,
    save_model,
    train,
    write_labels,
    write_predictions,
)
from remarker._config import RunConfig, RunManifest, load_config, resolve_config
from remarker._corpus import (
    NO_RELATION,
    Corpus,
    DatasetStats,
    EntitySpan,
    FieldMapping,
    RelationLabel,
    TokenizedInstance,
    TypeVocabulary,
    compute_stats,
    parse_dataset,
    read_dataset,
    serialize_instance,
    validate_instance,
    write_dataset,
)
from remarker._errors import (
    ArtifactError,
    ChecksumError,
    ConfigError,
    DataError,
    DegenerateLabelSetError,
    FormatVersionError,
    MarkerCollisionError,
    RemarkerError,
    SchemeMismatchError,
    UsageError,
)
from remarker._eval import (
    UNDEFINED,
    ConfusionMatrix,
    EvalReport,
    ModelComparison,
    accuracy,
    align,
    compare_models,
    confusion,
    evaluate,
    micro_f1,
    per_class_f1,
    per_pair_report,
    strict_f1,
)
from remarker._markers import (
    MarkedInstance,
    MarkerScheme,
    insert_markers,
    read_marked_dataset,
    remap_span,
    strip_markers,
)
from remarker._notifiers import DiscordNotifier, SlackNotifier
from remarker._router import (
    DEFAULT_PAIR_KEYS,
    EntityPairKey,
    PairRoutedClassifier,
    Partition,
    merge_predictions,
    pair_key,
    partition_dataset,
)
from remarker._watch import EpochWatch, RunWatch

__all__ = [
    "DEFAULT_PAIR_KEYS",
    "NO_RELATION",
    "UNDEFINED",
    "ArtifactError",
    "ChecksumError",
    "ConfigError",
    "ConfusionMatrix",
    "Corpus",
    "DataError",
    "DatasetStats",
    "DegenerateLabelSetError",
    "DiscordNotifier",
    "EntityPairKey",
    "EntitySpan",
    "EpochWatch",
    "EvalReport",
    "ExternalScoreFile",
    "FieldMapping",
    "FormatVersionError",
    "LabelVocabulary",
    "MarkedInstance",
    "MarkerCollisionError",
    "MarkerScheme",
    "ModelComparison",
    "PairRoutedClassifier",
    "Partition",
    "PredictionRecord",
    "Predictor",
    "RelationLabel",
    "RemarkerError",
    "RunConfig",
    "RunManifest",
    "RunWatch",
    "SchemeMismatchError",
    "SlackNotifier",
    "SoftmaxModel",
    "TokenizedInstance",
    "TrainConfig",
    "TypeVocabulary",
    "UsageError",
    "accuracy",
    "align",
    "compare_models",
    "compute_stats",
    "confusion",
    "evaluate",
    "insert_markers",
    "load_config",
    "load_external_predictions",
    "load_model",
    "merge_predictions",
    "micro_f1",
    "pair_key",
    "parse_dataset",
    "partition_dataset",
    "per_class_f1",
    "per_pair_report",
    "predict",
    "read_dataset",
    "read_labels",
    "read_marked_dataset",
    "remap_span",
    "resolve_config",
    "save_model",
    "serialize_instance",
    "strict_f1",
    "strip_markers",
    "train",
    "validate_instance",
    "write_dataset",
    "write_labels",
    "write_predictions",
]

__version__ = "0.1.0"
