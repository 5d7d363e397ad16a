"""
Binary model artifacts.

Layout::

    magic (4 bytes) | format version (u16) | header length (u32) | JSON header
    | columns (.npy) | weights (.npy) | bias (.npy) | SHA-256 of all prior bytes

All integers are big-endian.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from typing import TYPE_CHECKING, Any

import numpy as np

from remarker._classifier.base import LabelVocabulary
from remarker._classifier.softmax import SoftmaxModel, TrainConfig
from remarker._corpus import RelationLabel
from remarker._errors import ArtifactError, ChecksumError, FormatVersionError
from remarker._markers import MarkerScheme
from remarker._utils import atomic_write

if TYPE_CHECKING:
    import os


MAGIC = b"RMKM"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct(">4sHI")
_DIGEST_SIZE = hashlib.sha256().digest_size


def _header(model: SoftmaxModel) -> dict[str, Any]:
    return {
        "labels": list(model.labels),
        "no_relation": model.labels.no_relation,
        "scheme": model.marker_scheme.value,
        "config": model.config.to_dict(),
        "history": list(model.history),
        "fingerprint": model.fingerprint(),
    }


def dumps_model(model: SoftmaxModel, version: int = FORMAT_VERSION) -> bytes:
    header = json.dumps(_header(model), sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(_PREAMBLE.pack(MAGIC, version, len(header)))
    buf.write(header)
    for arr in (model.columns, model.weights, model.bias):
        np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
    payload = buf.getvalue()
    return payload + hashlib.sha256(payload).digest()


def loads_model(data: bytes, source: str = "<bytes>") -> SoftmaxModel:
    """
    Decode an artifact produced by :func:`dumps_model`.

    Raises:
        ArtifactError: Not a model artifact.
        FormatVersionError: Written by a newer format version.
        ChecksumError: Truncated or corrupted payload.
    """
    if len(data) < _PREAMBLE.size + _DIGEST_SIZE:
        raise ChecksumError(f"{source}: truncated model artifact")
    magic, version, header_len = _PREAMBLE.unpack_from(data)
    if magic != MAGIC:
        raise ArtifactError(f"{source}: not a remarker model (bad magic {magic!r})")
    if version > FORMAT_VERSION:
        raise FormatVersionError(
            f"{source}: format version {version} is newer than supported "
            f"version {FORMAT_VERSION}"
        )
    payload, digest = data[:-_DIGEST_SIZE], data[-_DIGEST_SIZE:]
    if hashlib.sha256(payload).digest() != digest:
        raise ChecksumError(f"{source}: checksum mismatch (corrupted or truncated)")

    buf = io.BytesIO(payload)
    buf.seek(_PREAMBLE.size)
    header = json.loads(buf.read(header_len).decode("utf-8"))
    columns, weights, bias = (np.load(buf, allow_pickle=False) for _ in range(3))
    model = SoftmaxModel(
        LabelVocabulary(
            tuple(RelationLabel(lab) for lab in header["labels"]),
            header["no_relation"],
        ),
        MarkerScheme.from_name(header["scheme"]),
        TrainConfig.from_dict(header["config"]),
        columns.astype(np.int64, copy=False),
        weights.astype(np.float64, copy=False),
        bias.astype(np.float64, copy=False),
        tuple(float(v) for v in header["history"]),
    )
    if model.fingerprint() != header["fingerprint"]:
        raise ChecksumError(f"{source}: model fingerprint mismatch")
    return model


def save_model(model: SoftmaxModel, path: str | os.PathLike[str]) -> None:
    with atomic_write(path, "wb") as f:
        f.write(dumps_model(model))


def load_model(path: str | os.PathLike[str]) -> SoftmaxModel:
    with open(path, "rb") as f:
        return loads_model(f.read(), source=str(path))
