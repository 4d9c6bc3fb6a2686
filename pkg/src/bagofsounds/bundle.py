"""Model persistence: one JSON document per trained model.

Numeric arrays are stored as base64-encoded little-endian blocks (f8 for
floats, i8 for integers) so reload reproduces every parameter bit for
bit; the JSON itself is rendered canonically (sorted keys, no spaces) so
identical runs yield byte-identical files.  A format_version field gates
loading.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .audio_features import MinMaxNormalizer
from .classifiers import (
    DecisionTree,
    ForestModel,
    LinearModel,
    LossKind,
    Method,
    NBModel,
    TrainConfig,
    TrainedModel,
    predict,
)
from .corpus import LabelScheme, SchemeKind, SplitSpec
from .errors import DataError
from .pipeline import AudioConfig, Modality, SpeechFeaturizer, TextFeaturizer
from .text_features import TfidfModel, Vocabulary

FORMAT_VERSION = 1


class VersionMismatch(DataError):
    pass


class MalformedBundle(DataError):
    pass


Featurizer = Union[TextFeaturizer, SpeechFeaturizer]


@dataclass(frozen=True, eq=False)
class ModelBundle:
    """Everything needed to reproduce predictions: scheme, featurizer, model."""

    scheme: LabelScheme
    modality: Modality
    language: str
    split: SplitSpec
    train_config: TrainConfig
    featurizer: Featurizer
    model: TrainedModel
    format_version: int = FORMAT_VERSION


def _encode_array(arr: np.ndarray) -> dict:
    arr = np.asarray(arr)
    if arr.dtype.kind in ("i", "u", "b"):
        tag, dtype = "i8", "<i8"
    else:
        tag, dtype = "f8", "<f8"
    block = np.ascontiguousarray(arr, dtype=dtype)
    return {
        "dtype": tag,
        "shape": list(arr.shape),
        "data": base64.b64encode(block.tobytes(order="C")).decode("ascii"),
    }


def _decode_array(obj: dict) -> np.ndarray:
    dtype = "<i8" if obj["dtype"] == "i8" else "<f8"
    flat = np.frombuffer(base64.b64decode(obj["data"]), dtype=dtype)
    out = flat.reshape(obj["shape"]).copy()
    return out.astype(np.int64) if obj["dtype"] == "i8" else out.astype(np.float64)


def _model_to_doc(model: TrainedModel) -> dict:
    if isinstance(model, NBModel):
        return {
            "kind": "nb",
            "classes": list(model.classes),
            "class_log_prior": _encode_array(model.class_log_prior),
            "feature_log_prob": _encode_array(model.feature_log_prob),
        }
    if isinstance(model, LinearModel):
        return {
            "kind": "linear",
            "loss": model.loss.value,
            "classes": list(model.classes),
            "weights": _encode_array(model.weights),
            "bias": _encode_array(model.bias),
        }
    return {
        "kind": "forest",
        "classes": list(model.classes),
        "n_features": model.n_features,
        "trees": [
            {
                "feature": _encode_array(t.feature),
                "threshold": _encode_array(t.threshold),
                "left": _encode_array(t.left),
                "right": _encode_array(t.right),
                "histogram": _encode_array(t.histogram),
            }
            for t in model.trees
        ],
    }


def _model_from_doc(doc: dict) -> TrainedModel:
    kind = doc["kind"]
    classes = tuple(doc["classes"])
    if kind == "nb":
        return NBModel(
            classes,
            _decode_array(doc["class_log_prior"]),
            _decode_array(doc["feature_log_prob"]),
        )
    if kind == "linear":
        return LinearModel(
            classes,
            _decode_array(doc["weights"]),
            _decode_array(doc["bias"]),
            LossKind(doc["loss"]),
        )
    if kind == "forest":
        trees = tuple(
            DecisionTree(
                _decode_array(t["feature"]),
                _decode_array(t["threshold"]),
                _decode_array(t["left"]),
                _decode_array(t["right"]),
                _decode_array(t["histogram"]),
            )
            for t in doc["trees"]
        )
        return ForestModel(classes, trees, int(doc["n_features"]))
    raise MalformedBundle(f"unknown model kind {kind!r}")


def _featurizer_to_doc(featurizer: Featurizer) -> dict:
    if isinstance(featurizer, TextFeaturizer):
        return {
            "kind": "text",
            "terms": list(featurizer.model.vocabulary.terms),
            "idf": _encode_array(featurizer.model.idf),
        }
    cfg = featurizer.config
    normalizer = featurizer.normalizer
    return {
        "kind": "speech",
        "audio": {
            "sample_rate_hz": cfg.sample_rate_hz,
            "frame_length": cfg.frame_length,
            "hop_length": cfg.hop_length,
            "window": cfg.window.value,
            "n_mels": cfg.n_mels,
            "fmin_hz": cfg.fmin_hz,
            "fmax_hz": cfg.fmax_hz,
            "normalize": cfg.normalize,
        },
        "pad_frames": featurizer.pad_frames,
        "normalizer": None
        if normalizer is None
        else {
            "col_min": _encode_array(normalizer.col_min),
            "col_max": _encode_array(normalizer.col_max),
        },
    }


def _featurizer_from_doc(doc: dict) -> Featurizer:
    kind = doc["kind"]
    if kind == "text":
        terms = doc["terms"]
        vocabulary = Vocabulary({term: i for i, term in enumerate(terms)})
        return TextFeaturizer(TfidfModel(vocabulary, _decode_array(doc["idf"])))
    if kind == "speech":
        audio = AudioConfig(**doc["audio"])
        norm_doc = doc["normalizer"]
        normalizer = (
            None
            if norm_doc is None
            else MinMaxNormalizer(
                _decode_array(norm_doc["col_min"]), _decode_array(norm_doc["col_max"])
            )
        )
        return SpeechFeaturizer(audio, int(doc["pad_frames"]), normalizer)
    raise MalformedBundle(f"unknown featurizer kind {kind!r}")


def bundle_to_document(bundle: ModelBundle) -> dict:
    return {
        "format_version": bundle.format_version,
        "scheme": {"kind": bundle.scheme.kind.value, "labels": list(bundle.scheme.labels)},
        "modality": bundle.modality.value,
        "language": bundle.language,
        "split": {
            "train_fraction": bundle.split.train_fraction,
            "seed": bundle.split.seed,
            "stratified": bundle.split.stratified,
        },
        "train": {
            "method": bundle.train_config.method.value,
            "seed": bundle.train_config.seed,
            "nb_alpha": bundle.train_config.nb_alpha,
            "l2_lambda": bundle.train_config.l2_lambda,
            "max_epochs": bundle.train_config.max_epochs,
            "learning_rate": bundle.train_config.learning_rate,
            "tolerance": bundle.train_config.tolerance,
            "rf_trees": bundle.train_config.rf_trees,
            "rf_max_depth": bundle.train_config.rf_max_depth,
            "rf_bootstrap": bundle.train_config.rf_bootstrap,
        },
        "featurizer": _featurizer_to_doc(bundle.featurizer),
        "model": _model_to_doc(bundle.model),
    }


def bundle_from_document(doc: dict) -> ModelBundle:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(
            f"bundle format_version {version!r}, this build reads {FORMAT_VERSION}"
        )
    try:
        scheme = LabelScheme(SchemeKind(doc["scheme"]["kind"]), tuple(doc["scheme"]["labels"]))
        split = SplitSpec(**doc["split"])
        train_config = TrainConfig(**{**doc["train"], "method": Method(doc["train"]["method"])})
        return ModelBundle(
            scheme=scheme,
            modality=Modality(doc["modality"]),
            language=doc["language"],
            split=split,
            train_config=train_config,
            featurizer=_featurizer_from_doc(doc["featurizer"]),
            model=_model_from_doc(doc["model"]),
            format_version=version,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedBundle(f"bundle document is malformed: {exc}") from exc


def serialize_bundle(bundle: ModelBundle) -> bytes:
    doc = bundle_to_document(bundle)
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def save_bundle(bundle: ModelBundle, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_bundle(bundle))


def load_bundle(path) -> ModelBundle:
    try:
        with open(path, "rb") as fh:
            doc = json.loads(fh.read().decode("utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read bundle {path}: {exc}") from exc
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedBundle(f"bundle {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedBundle(f"bundle {path} must hold a JSON object")
    return bundle_from_document(doc)


def bundle_predict(bundle: ModelBundle, utterances, base_dir=None, cache_dir=None) -> list[str]:
    """Featurize with the bundle's fitted state and predict label codes."""
    if bundle.modality is Modality.TEXT:
        matrix = bundle.featurizer.transform(utterances)
    else:
        matrix = bundle.featurizer.transform(utterances, base_dir=base_dir, cache_dir=cache_dir)
    return predict(bundle.model, matrix)
