"""Shared builders for tests: WAV files, manifests, synthetic corpora.

The WAV writer here is deliberately independent of the package decoder:
it assembles RIFF bytes with struct so decode tests have a second
implementation to check against.
"""

from __future__ import annotations

import csv
import struct

import numpy as np

MANIFEST_HEADER = [
    "id",
    "subject_id",
    "gender",
    "source",
    "utterance_no",
    "text",
    "audio_path",
    "binary_label",
    "multiclass_label",
]


def wav_bytes(samples, sample_rate=16000, encoding="pcm16", channels=1) -> bytes:
    """Assemble a RIFF/WAVE blob; samples are floats in [-1, 1].

    For multichannel input pass shape (n_frames, channels); values are
    interleaved frame by frame.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if channels > 1:
        assert arr.ndim == 2 and arr.shape[1] == channels
        arr = arr.reshape(-1)
    if encoding == "pcm16":
        tag, bits = 1, 16
        ints = np.clip(np.round(arr * 32768.0), -32768, 32767).astype("<i2")
        payload = ints.tobytes()
    elif encoding == "float32":
        tag, bits = 3, 32
        payload = arr.astype("<f4").tobytes()
    else:
        raise ValueError(encoding)
    block_align = channels * bits // 8
    byte_rate = sample_rate * block_align
    fmt_body = struct.pack("<HHIIHH", tag, channels, sample_rate, byte_rate, block_align, bits)
    chunks = b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) % 2:
        chunks += b"\x00"
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


def write_wav(path, samples, sample_rate=16000, encoding="pcm16", channels=1) -> None:
    with open(path, "wb") as fh:
        fh.write(wav_bytes(samples, sample_rate, encoding, channels))


def sine(freq_hz, duration_s=0.2, sample_rate=16000, amplitude=0.5, phase=0.0):
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    return amplitude * np.sin(2.0 * np.pi * freq_hz * t + phase)


def manifest_row(
    uid,
    text="",
    audio_path="",
    binary_label="",
    multiclass_label="",
    subject_id="s1",
    gender="M",
    source="movie",
    utterance_no=0,
) -> list:
    return [
        uid,
        subject_id,
        gender,
        source,
        str(utterance_no),
        text,
        audio_path,
        binary_label,
        multiclass_label,
    ]


def write_manifest(path, rows, header=None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER if header is None else header)
        writer.writerows(rows)


# Disjoint per-class vocabularies make text classes linearly separable.
CLASS_WORDS = {
    "H": ["vile", "scum", "wretch", "filth", "curse"],
    "N": ["hello", "thanks", "weather", "lunch", "music"],
    "C": ["slander", "smear", "libel", "insult", "taunt"],
    "P": ["creep", "leer", "stalk", "grope", "harass"],
    "R": ["mock", "sneer", "deride", "scorn", "jeer"],
    "G": ["sexist", "chauvin", "misogyn", "machismo", "bigot"],
}


def separable_text(label: str, i: int) -> str:
    words = CLASS_WORDS[label]
    return " ".join(words[(i + j) % len(words)] for j in range(3))


def binary_of(multiclass_label: str) -> str:
    return "N" if multiclass_label == "N" else "H"


# Distinct tone frequencies keep audio classes separable in Mel space.
CLASS_FREQS = {
    "H": 2200.0,
    "N": 300.0,
    "C": 2600.0,
    "P": 1200.0,
    "R": 3400.0,
    "G": 700.0,
}


def build_corpus(dir_path, per_class, multiclass=True, sample_rate=16000, base_duration=0.06):
    """Write tone WAVs plus a manifest covering both modalities.

    per_class maps label codes to counts: multiclass codes when
    `multiclass` is true (binary labels derived by the hierarchy rule),
    else binary codes directly.  Returns the manifest path.
    """
    dir_path.mkdir(parents=True, exist_ok=True)
    wav_dir = dir_path / "audio"
    wav_dir.mkdir(exist_ok=True)
    rows = []
    for label, n in per_class.items():
        freq = CLASS_FREQS[label]
        for i in range(n):
            uid = f"{label.lower()}{i}"
            duration = base_duration + 0.005 * (i % 4)
            samples = sine(
                freq * (1.0 + 0.01 * (i % 5)),
                duration_s=duration,
                sample_rate=sample_rate,
                amplitude=0.4,
            )
            write_wav(wav_dir / f"{uid}.wav", samples, sample_rate=sample_rate)
            rows.append(
                manifest_row(
                    uid,
                    text=separable_text(label, i),
                    audio_path=f"audio/{uid}.wav",
                    binary_label=binary_of(label) if multiclass else label,
                    multiclass_label=label if multiclass else "",
                    utterance_no=i,
                )
            )
    manifest = dir_path / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest
