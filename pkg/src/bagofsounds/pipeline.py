"""Fitted featurizers binding corpus rows to feature matrices.

TextFeaturizer wraps the tokenize/count/tf-idf chain; SpeechFeaturizer
wraps decode/resample/stft/mel/dB/pad/flatten plus per-column min-max
scaling.  Both are fit on the training split only and are immutable
afterwards, so transforms can run concurrently.

Audio extraction runs across files on a thread pool capped by the
BOS_THREADS environment variable; results are assembled by index, so the
output is identical for any worker count.  An optional on-disk cache
stores one decibel-scale spectrogram per (file, parameters) pair.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .audio_features import (
    FeatureMatrix,
    MinMaxNormalizer,
    Provenance,
    Spectrogram,
    SpectrogramAxis,
    StftConfig,
    WindowKind,
    build_mel_filterbank,
    decode_wav,
    flatten,
    mel_spectrogram,
    pad_to_shape,
    power_to_db,
    read_cache_file,
    resample,
    stft,
    write_cache_file,
)
from .corpus import Utterance
from .errors import ConfigError, DataError
from .text_features import (
    TfidfModel,
    count_transform,
    fit_tfidf,
    fit_vocabulary,
    tfidf_transform,
    tokenize,
)

THREADS_ENV = "BOS_THREADS"


class Modality(str, Enum):
    TEXT = "text"
    SPEECH = "speech"


class MissingText(DataError):
    pass


class MissingAudio(DataError):
    pass


@dataclass(frozen=True)
class AudioConfig:
    """Spectrogram front-end parameters plus the scaling switch."""

    sample_rate_hz: int = 16000
    frame_length: int = 512
    hop_length: int = 256
    window: WindowKind = WindowKind.HANN
    n_mels: int = 80
    fmin_hz: float = 0.0
    fmax_hz: float = 8000.0
    normalize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "window", WindowKind(self.window))
        if self.sample_rate_hz <= 0:
            raise ConfigError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        # Delegates frame/hop validation.
        self.stft_config()

    def stft_config(self) -> StftConfig:
        return StftConfig(self.frame_length, self.hop_length, self.window)


def worker_count() -> int:
    """Thread-pool size: BOS_THREADS when set, else a small default."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return min(8, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {n}")
    return n


def _resolve_audio_path(u: Utterance, base_dir) -> Path:
    if not u.audio_path:
        raise MissingAudio(f"utterance {u.id!r} has no audio_path")
    path = Path(u.audio_path)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    return path


def _cache_key(path: Path, cfg: AudioConfig) -> str:
    tag = (
        f"{path.resolve()}|{cfg.sample_rate_hz}|{cfg.frame_length}|{cfg.hop_length}"
        f"|{cfg.window.value}|{cfg.n_mels}|{cfg.fmin_hz}|{cfg.fmax_hz}"
    )
    return hashlib.sha256(tag.encode("utf-8")).hexdigest()


def extract_mel_db(path, cfg: AudioConfig, filterbank=None) -> Spectrogram:
    """Full per-file chain up to the decibel Mel spectrogram (no padding)."""
    if filterbank is None:
        filterbank = build_mel_filterbank(
            cfg.sample_rate_hz, cfg.frame_length, cfg.n_mels, cfg.fmin_hz, cfg.fmax_hz
        )
    wave = resample(decode_wav(path), cfg.sample_rate_hz)
    return power_to_db(mel_spectrogram(stft(wave, cfg.stft_config()), filterbank))


def _extract_many(
    utterances: Sequence[Utterance],
    cfg: AudioConfig,
    base_dir,
    cache_dir,
) -> list[Spectrogram]:
    """Decibel Mel spectrograms for every utterance, in input order."""
    filterbank = build_mel_filterbank(
        cfg.sample_rate_hz, cfg.frame_length, cfg.n_mels, cfg.fmin_hz, cfg.fmax_hz
    )
    paths = [_resolve_audio_path(u, base_dir) for u in utterances]
    for u, path in zip(utterances, paths):
        if not path.is_file():
            raise MissingAudio(f"utterance {u.id!r}: audio file not found: {path}")
    cache = Path(cache_dir) if cache_dir is not None else None
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)

    def one(path: Path) -> Spectrogram:
        if cache is not None:
            entry = cache / (_cache_key(path, cfg) + ".bos1")
            if entry.is_file():
                return Spectrogram(read_cache_file(entry), SpectrogramAxis.MEL_DECIBEL)
            spec = extract_mel_db(path, cfg, filterbank)
            write_cache_file(entry, spec.values)
            return spec
        return extract_mel_db(path, cfg, filterbank)

    if not paths:
        return []
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        return list(pool.map(one, paths))


@dataclass(frozen=True, eq=False)
class SpeechFeaturizer:
    """Fitted state of the audio front end.

    pad_frames is the longest training spectrogram; shorter clips are
    right-padded with their silence floor and longer ones truncated, so
    every vector has length n_mels * pad_frames.
    """

    config: AudioConfig
    pad_frames: int
    normalizer: Optional[MinMaxNormalizer]

    @classmethod
    def fit(
        cls,
        utterances: Sequence[Utterance],
        config: AudioConfig = AudioConfig(),
        base_dir=None,
        cache_dir=None,
    ) -> tuple["SpeechFeaturizer", FeatureMatrix]:
        if not utterances:
            raise DataError("cannot fit a speech featurizer on zero utterances")
        specs = _extract_many(utterances, config, base_dir, cache_dir)
        pad_frames = max(s.n_frames for s in specs)
        raw = _stack(specs, pad_frames)
        normalizer = MinMaxNormalizer.fit(raw) if config.normalize else None
        featurizer = cls(config, pad_frames, normalizer)
        matrix = normalizer.transform(raw) if normalizer is not None else raw
        return featurizer, matrix

    def transform(
        self, utterances: Sequence[Utterance], base_dir=None, cache_dir=None
    ) -> FeatureMatrix:
        specs = _extract_many(utterances, self.config, base_dir, cache_dir)
        raw = _stack(specs, self.pad_frames, n_mels=self.config.n_mels)
        if self.normalizer is not None:
            return self.normalizer.transform(raw)
        return raw

    @property
    def n_features(self) -> int:
        return self.config.n_mels * self.pad_frames


def _stack(specs: Sequence[Spectrogram], pad_frames: int, n_mels: Optional[int] = None) -> FeatureMatrix:
    if not specs:
        width = (n_mels or 0) * pad_frames
        return FeatureMatrix(np.zeros((0, width)), Provenance.AUDIO)
    rows = [flatten(pad_to_shape(s, pad_frames)).values for s in specs]
    return FeatureMatrix(np.vstack(rows), Provenance.AUDIO)


@dataclass(frozen=True, eq=False)
class TextFeaturizer:
    """Fitted vocabulary and idf weights of the text front end."""

    model: TfidfModel

    @classmethod
    def fit(cls, utterances: Sequence[Utterance]) -> tuple["TextFeaturizer", FeatureMatrix]:
        docs = [tokenize(u.text) for u in _require_text(utterances)]
        vocabulary = fit_vocabulary(docs)
        counts = count_transform(docs, vocabulary)
        model = fit_tfidf(counts)
        return cls(model), tfidf_transform(counts, model)

    def transform(self, utterances: Sequence[Utterance]) -> FeatureMatrix:
        docs = [tokenize(u.text) for u in _require_text(utterances)]
        counts = count_transform(docs, self.model.vocabulary)
        return tfidf_transform(counts, self.model)

    @property
    def n_features(self) -> int:
        return self.model.idf.size


def _require_text(utterances: Sequence[Utterance]) -> Sequence[Utterance]:
    missing = [u.id for u in utterances if not u.text]
    if missing:
        raise MissingText(
            f"{len(missing)} utterance(s) have no text: {', '.join(missing)}"
        )
    return utterances
