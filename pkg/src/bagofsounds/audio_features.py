"""Audio front end: WAV decoding, STFT, Mel filterbank, dB scaling.

The chain for one clip is

    decode_wav -> resample -> stft -> mel_spectrogram -> power_to_db
    -> pad_to_shape -> flatten

and the resulting vectors are stacked into a FeatureMatrix which is
min-max scaled per column.  Every step is a pure function; fitted state
(pad width, column ranges) lives in small dataclasses so extraction can
run concurrently across files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .errors import ConfigError, DataError, ShapeMismatch

MEL_SCALE_FACTOR = 2595.0
MEL_BREAK_HZ = 700.0
DB_AMIN = 1e-10
DB_TOP = 80.0
CACHE_MAGIC = b"BOS1"


class UnsupportedEncoding(DataError):
    pass


class CorruptHeader(DataError):
    pass


class EmptyAudio(DataError):
    pass


class SignalTooShort(DataError):
    pass


class CacheError(DataError):
    """Feature cache file is malformed or truncated."""


class NegativeFrequency(ConfigError):
    pass


class InvalidRange(ConfigError):
    pass


class NyquistExceeded(ConfigError):
    pass


class EmptyMatrix(DataError):
    pass


class WindowKind(str, Enum):
    HANN = "hann"
    RECTANGULAR = "rectangular"


class SpectrogramAxis(str, Enum):
    LINEAR_POWER = "linear_power"
    MEL_POWER = "mel_power"
    MEL_DECIBEL = "mel_decibel"


class Provenance(str, Enum):
    AUDIO = "audio"
    TEXT = "text"


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono PCM signal as float64 samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 1:
            raise ValueError(f"waveform samples must be 1-D, got shape {self.samples.shape}")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")


@dataclass(frozen=True)
class StftConfig:
    frame_length: int = 512
    hop_length: int = 256
    window: WindowKind = WindowKind.HANN

    def __post_init__(self):
        n = self.frame_length
        if n <= 0 or (n & (n - 1)) != 0:
            raise ConfigError(f"frame_length must be a power of two, got {n}")
        if self.hop_length <= 0:
            raise ConfigError(f"hop_length must be positive, got {self.hop_length}")
        if self.hop_length > n:
            raise ConfigError(
                f"hop_length {self.hop_length} exceeds frame_length {n}"
            )


@dataclass(frozen=True, eq=False)
class MelFilterbank:
    n_mels: int
    fmin_hz: float
    fmax_hz: float
    weights: np.ndarray  # n_mels x (frame_length/2 + 1)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    values: np.ndarray  # n_rows x n_frames
    axis: SpectrogramAxis

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.ndim != 2:
            raise ValueError(f"spectrogram must be 2-D, got shape {self.values.shape}")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.ndim != 1:
            raise ValueError(f"feature vector must be 1-D, got shape {self.values.shape}")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rows are samples, columns are features; provenance says which front end."""

    values: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {self.values.shape}")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


# --- WAV decoding -----------------------------------------------------------

_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_IEEE_FLOAT = 3


def decode_wav(path) -> Waveform:
    """Decode a RIFF/WAVE file: PCM 16-bit or IEEE float 32-bit, any channel count.

    Multichannel audio is downmixed to mono by the per-frame channel mean.
    16-bit integers are scaled by 1/32768 so the range is [-1, 1).
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CorruptHeader(f"cannot read {path}: {exc}") from exc

    if len(blob) < 12 or blob[0:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise CorruptHeader(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    offset = 12
    while offset + 8 <= len(blob):
        chunk_id = blob[offset : offset + 4]
        (size,) = struct.unpack_from("<I", blob, offset + 4)
        body_start = offset + 8
        if body_start + size > len(blob):
            raise CorruptHeader(f"{path}: chunk {chunk_id!r} overruns end of file")
        if chunk_id == b"fmt ":
            if size < 16:
                raise CorruptHeader(f"{path}: fmt chunk too small ({size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", blob, body_start)
        elif chunk_id == b"data":
            data = blob[body_start : body_start + size]
        offset = body_start + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise CorruptHeader(f"{path}: missing fmt chunk")
    if data is None:
        raise CorruptHeader(f"{path}: missing data chunk")
    audio_format, n_channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if n_channels < 1:
        raise CorruptHeader(f"{path}: channel count {n_channels}")
    if sample_rate <= 0:
        raise CorruptHeader(f"{path}: sample rate {sample_rate}")

    if audio_format == _WAVE_FORMAT_PCM and bits == 16:
        raw = np.frombuffer(data[: len(data) - len(data) % 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(data[: len(data) - len(data) % 4], dtype="<f4")
        samples = raw.astype(np.float64)
    else:
        raise UnsupportedEncoding(
            f"{path}: format tag {audio_format} with {bits} bits per sample "
            "(only PCM16 and IEEE float32 are supported)"
        )

    if samples.size == 0:
        raise EmptyAudio(f"{path}: zero-length data chunk")
    if n_channels > 1:
        usable = samples.size - samples.size % n_channels
        if usable == 0:
            raise EmptyAudio(f"{path}: fewer samples than channels")
        samples = samples[:usable].reshape(-1, n_channels).mean(axis=1)
    return Waveform(samples, int(sample_rate))


def resample(w: Waveform, target_sr_hz: int) -> Waveform:
    """Linear-interpolation resampling onto a uniform grid at target_sr_hz."""
    if target_sr_hz <= 0:
        raise ConfigError(f"target sample rate must be positive, got {target_sr_hz}")
    if w.sample_rate_hz == target_sr_hz:
        return w
    n_out = max(1, int(round(w.samples.size * target_sr_hz / w.sample_rate_hz)))
    t_in = np.arange(w.samples.size) / w.sample_rate_hz
    t_out = np.arange(n_out) / target_sr_hz
    return Waveform(np.interp(t_out, t_in, w.samples), target_sr_hz)


# --- Spectrogram chain ------------------------------------------------------


def _window_values(kind: WindowKind, length: int) -> np.ndarray:
    if kind is WindowKind.RECTANGULAR:
        return np.ones(length)
    # Periodic Hann, the common analysis-window convention.
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)


def stft(w: Waveform, cfg: StftConfig) -> Spectrogram:
    """One-sided power spectrogram; rows are frequency bins 0..frame_length/2."""
    n = w.samples.size
    if n < cfg.frame_length:
        raise SignalTooShort(
            f"signal has {n} samples, needs at least frame_length={cfg.frame_length}"
        )
    n_frames = 1 + (n - cfg.frame_length) // cfg.hop_length
    starts = cfg.hop_length * np.arange(n_frames)
    idx = starts[:, None] + np.arange(cfg.frame_length)[None, :]
    frames = w.samples[idx] * _window_values(cfg.window, cfg.frame_length)
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    return Spectrogram(power.T, SpectrogramAxis.LINEAR_POWER)


def hz_to_mel(f: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """HTK Mel scale: m = 2595 * log10(1 + f/700)."""
    arr = np.asarray(f, dtype=np.float64)
    if np.any(arr < 0):
        raise NegativeFrequency(f"frequency must be >= 0 Hz, got {f}")
    out = MEL_SCALE_FACTOR * np.log10(1.0 + arr / MEL_BREAK_HZ)
    return float(out) if np.isscalar(f) or arr.ndim == 0 else out


def mel_to_hz(m: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    arr = np.asarray(m, dtype=np.float64)
    if np.any(arr < 0):
        raise NegativeFrequency(f"mel value must be >= 0, got {m}")
    out = MEL_BREAK_HZ * (10.0 ** (arr / MEL_SCALE_FACTOR) - 1.0)
    return float(out) if np.isscalar(m) or arr.ndim == 0 else out


def build_mel_filterbank(
    sr_hz: int,
    frame_length: int,
    n_mels: int,
    fmin_hz: float,
    fmax_hz: float,
) -> MelFilterbank:
    """Triangular filters with peaks equally spaced on the Mel scale.

    Filter i rises linearly (in Hz) from breakpoint i to its peak at
    breakpoint i+1 and falls to zero at breakpoint i+2; peak weight is 1.
    """
    if n_mels < 1:
        raise ConfigError(f"n_mels must be >= 1, got {n_mels}")
    if fmin_hz < 0:
        raise NegativeFrequency(f"fmin_hz must be >= 0, got {fmin_hz}")
    if fmin_hz >= fmax_hz:
        raise InvalidRange(f"fmin_hz {fmin_hz} must be below fmax_hz {fmax_hz}")
    if fmax_hz > sr_hz / 2:
        raise NyquistExceeded(
            f"fmax_hz {fmax_hz} exceeds Nyquist {sr_hz / 2} for sr {sr_hz}"
        )
    n_bins = frame_length // 2 + 1
    fft_freqs = np.arange(n_bins) * (sr_hz / frame_length)
    mel_pts = np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2)
    hz_pts = np.asarray(mel_to_hz(mel_pts))
    fdiff = np.diff(hz_pts)
    fdiff[fdiff == 0.0] = 1.0  # degenerate spacing: edge contributes nothing
    ramps = hz_pts[:, None] - fft_freqs[None, :]
    rising = -ramps[:-2] / fdiff[:-1][:, None]
    falling = ramps[2:] / fdiff[1:][:, None]
    weights = np.maximum(0.0, np.minimum(rising, falling))
    return MelFilterbank(n_mels, float(fmin_hz), float(fmax_hz), weights)


def mel_spectrogram(s: Spectrogram, fb: MelFilterbank) -> Spectrogram:
    if s.axis is not SpectrogramAxis.LINEAR_POWER:
        raise ValueError(f"expected a LinearPower spectrogram, got {s.axis.value}")
    if s.n_rows != fb.weights.shape[1]:
        raise ShapeMismatch(
            f"spectrogram has {s.n_rows} frequency bins, filterbank expects "
            f"{fb.weights.shape[1]}"
        )
    return Spectrogram(fb.weights @ s.values, SpectrogramAxis.MEL_POWER)


def power_to_db(s: Spectrogram) -> Spectrogram:
    """Convert power to decibels relative to the spectrogram maximum.

    Cells are clamped below at amin=1e-10 before the log, and the result
    is floored at max_db - 80 so the dynamic range is bounded.
    """
    if s.axis is SpectrogramAxis.MEL_DECIBEL:
        raise ValueError("spectrogram is already in decibels")
    ref = max(float(s.values.max()), DB_AMIN) if s.values.size else DB_AMIN
    db = 10.0 * np.log10(np.maximum(s.values, DB_AMIN)) - 10.0 * np.log10(ref)
    if db.size:
        db = np.maximum(db, db.max() - DB_TOP)
    return Spectrogram(db, SpectrogramAxis.MEL_DECIBEL)


def pad_to_shape(s: Spectrogram, target_frames: int) -> Spectrogram:
    """Right-pad with the spectrogram minimum, or truncate, to target_frames."""
    if target_frames < 1:
        raise ConfigError(f"target_frames must be >= 1, got {target_frames}")
    if s.n_frames == target_frames:
        return s
    if s.n_frames > target_frames:
        return Spectrogram(s.values[:, :target_frames].copy(), s.axis)
    fill = float(s.values.min()) if s.values.size else 0.0
    pad = np.full((s.n_rows, target_frames - s.n_frames), fill)
    return Spectrogram(np.concatenate([s.values, pad], axis=1), s.axis)


def flatten(s: Spectrogram) -> FeatureVector:
    """Row-major flattening; length is n_rows * n_frames."""
    return FeatureVector(s.values.reshape(-1).copy(), Provenance.AUDIO)


# --- Min-max column scaling -------------------------------------------------


@dataclass(frozen=True, eq=False)
class MinMaxNormalizer:
    """Per-column affine map onto [0, 1], fitted once and reapplied.

    Constant columns map to zero.  Transforms of unseen data are clipped
    to [0, 1] so validation rows never leave the fitted range.
    """

    col_min: np.ndarray
    col_max: np.ndarray

    @classmethod
    def fit(cls, m: FeatureMatrix) -> "MinMaxNormalizer":
        if m.values.size == 0:
            raise EmptyMatrix("cannot fit a min-max normalizer on an empty matrix")
        return cls(m.values.min(axis=0), m.values.max(axis=0))

    def transform(self, m: FeatureMatrix) -> FeatureMatrix:
        if m.values.shape[1] != self.col_min.size:
            raise ShapeMismatch(
                f"matrix has {m.values.shape[1]} columns, normalizer was fitted "
                f"on {self.col_min.size}"
            )
        span = self.col_max - self.col_min
        safe = np.where(span > 0.0, span, 1.0)
        scaled = (m.values - self.col_min) / safe
        scaled = np.where(span > 0.0, scaled, 0.0)
        return FeatureMatrix(np.clip(scaled, 0.0, 1.0), m.provenance)


def min_max_normalize(m: FeatureMatrix) -> FeatureMatrix:
    """Fit on `m` and transform it; the one-shot form of MinMaxNormalizer."""
    return MinMaxNormalizer.fit(m).transform(m)


# --- Per-utterance feature cache -------------------------------------------


def write_cache_file(path, values: np.ndarray) -> None:
    """Write a 2-D float64 array: magic `BOS1`, u32 rows, u32 cols, row-major."""
    arr = np.ascontiguousarray(values, dtype="<f8")
    if arr.ndim != 2:
        raise ValueError(f"cache payload must be 2-D, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes(order="C"))


def read_cache_file(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != CACHE_MAGIC:
        raise CacheError(f"{path}: not a feature cache file")
    rows, cols = struct.unpack_from("<II", blob, 4)
    expected = 12 + 8 * rows * cols
    if len(blob) != expected:
        raise CacheError(f"{path}: expected {expected} bytes, found {len(blob)}")
    flat = np.frombuffer(blob, dtype="<f8", offset=12)
    return flat.reshape(rows, cols).astype(np.float64)
