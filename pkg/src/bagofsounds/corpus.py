"""Labeled multimodal corpus handling: manifests, label schemes, splits.

A dataset is a flat list of utterances loaded from a CSV manifest.  Each
utterance can carry a binary label (H/N) and a multiclass label; the two
are hierarchically consistent (a non-N multiclass label implies binary H).
Splitting is deterministic and, by default, stratified per class.
"""

from __future__ import annotations

import csv
import hashlib
import math
import random
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional

from .errors import DataError, UnknownLabel

MANIFEST_COLUMNS = (
    "id",
    "subject_id",
    "gender",
    "source",
    "utterance_no",
    "text",
    "audio_path",
    "binary_label",
    "multiclass_label",
)

MALAYALAM = "Malayalam"
TAMIL = "Tamil"
TELUGU = "Telugu"
DEFAULT_LANGUAGES = (MALAYALAM, TAMIL, TELUGU)

BINARY_LABELS = ("H", "N")
MULTICLASS_LABELS = ("C", "N", "P", "R", "G")


class ManifestError(DataError):
    """Malformed or unreadable manifest file."""


class UnreadableFile(ManifestError):
    pass


class MissingColumn(ManifestError):
    pass


class DuplicateId(ManifestError):
    pass


class InvalidField(ManifestError):
    pass


class UnlabeledUtterance(DataError):
    pass


class EmptyClassWarning(UserWarning):
    """A scheme label has no members; it contributes nothing to the split."""


class Gender(str, Enum):
    M = "M"
    F = "F"


class SchemeKind(str, Enum):
    BINARY = "binary"
    MULTICLASS = "multiclass"


@dataclass(frozen=True)
class LabelScheme:
    """Ordered label codes for one classification task."""

    kind: SchemeKind
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate label codes in scheme: {self.labels}")
        if self.kind is SchemeKind.BINARY and self.labels != BINARY_LABELS:
            raise ValueError(f"binary scheme must be exactly {BINARY_LABELS}")

    @classmethod
    def binary(cls) -> "LabelScheme":
        return cls(SchemeKind.BINARY, BINARY_LABELS)

    @classmethod
    def multiclass(cls, labels: Iterable[str] = MULTICLASS_LABELS) -> "LabelScheme":
        return cls(SchemeKind.MULTICLASS, tuple(labels))

    def index_of(self, code: str) -> int:
        try:
            return self.labels.index(code)
        except ValueError:
            raise UnknownLabel(code) from None


@dataclass(frozen=True)
class Utterance:
    """One labeled sample: text and/or an audio file, plus speaker metadata."""

    id: str
    subject_id: str
    gender: Gender
    source: str
    utterance_no: int
    text: str = ""
    audio_path: str = ""
    binary_label: Optional[str] = None
    multiclass_label: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise InvalidField("utterance id must be non-empty")
        if self.utterance_no < 0:
            raise InvalidField(f"utterance_no must be >= 0, got {self.utterance_no}")
        if not self.text and not self.audio_path:
            raise InvalidField(f"utterance {self.id!r} has neither text nor audio_path")
        # Hierarchical label consistency: multiclass N is the residual
        # no-hate class; anything else is a flavour of hate.
        if self.multiclass_label is not None and self.binary_label is not None:
            expected = "N" if self.multiclass_label == "N" else "H"
            if self.binary_label != expected:
                raise InvalidField(
                    f"utterance {self.id!r}: multiclass label "
                    f"{self.multiclass_label!r} requires binary label {expected!r}, "
                    f"got {self.binary_label!r}"
                )

    def label_for(self, scheme: LabelScheme) -> Optional[str]:
        if scheme.kind is SchemeKind.BINARY:
            return self.binary_label
        return self.multiclass_label


@dataclass(frozen=True)
class Dataset:
    """An immutable collection of utterances under one label scheme."""

    utterances: tuple[Utterance, ...]
    scheme: LabelScheme
    language: str = ""

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))

    def __len__(self) -> int:
        return len(self.utterances)

    def labels(self) -> list[Optional[str]]:
        return [u.label_for(self.scheme) for u in self.utterances]


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic train/validation split parameters."""

    train_fraction: float = 0.75
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0,1), got {self.train_fraction}")
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)


def load_manifest(path, scheme: LabelScheme, language: str = "") -> Dataset:
    """Parse a manifest CSV into a Dataset, validating labels against `scheme`.

    The header must match MANIFEST_COLUMNS exactly.  Empty strings mean an
    absent optional field.  Only the label column matching the scheme kind
    is validated against the scheme; the other column is kept opaque.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise MissingColumn(f"{path}: empty manifest, expected header row") from None
            if tuple(header) != MANIFEST_COLUMNS:
                missing = [c for c in MANIFEST_COLUMNS if c not in header]
                extra = [c for c in header if c not in MANIFEST_COLUMNS]
                raise MissingColumn(
                    f"{path}: bad header; missing {missing}, unexpected {extra}"
                )
            rows = [(lineno, row) for lineno, row in enumerate(reader, start=2) if row]
    except OSError as exc:
        raise UnreadableFile(f"cannot read manifest {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise UnreadableFile(f"manifest {path} is not valid UTF-8: {exc}") from exc

    utterances = []
    seen_ids = set()
    for lineno, row in rows:
        if len(row) != len(MANIFEST_COLUMNS):
            raise InvalidField(f"row {lineno}: expected {len(MANIFEST_COLUMNS)} fields, got {len(row)}")
        rec = dict(zip(MANIFEST_COLUMNS, row))
        uid = rec["id"].strip()
        if uid in seen_ids:
            raise DuplicateId(f"duplicate id {uid!r} (row {lineno})")
        seen_ids.add(uid)
        try:
            gender = Gender(rec["gender"].strip().upper())
        except ValueError:
            raise InvalidField(f"row {lineno}: gender must be M or F, got {rec['gender']!r}") from None
        try:
            utterance_no = int(rec["utterance_no"])
        except ValueError:
            raise InvalidField(f"row {lineno}: utterance_no must be an integer, got {rec['utterance_no']!r}") from None
        binary = rec["binary_label"].strip() or None
        multi = rec["multiclass_label"].strip() or None
        own = binary if scheme.kind is SchemeKind.BINARY else multi
        if own is not None and own not in scheme.labels:
            raise UnknownLabel(own, row=lineno)
        try:
            utterances.append(
                Utterance(
                    id=uid,
                    subject_id=rec["subject_id"],
                    gender=gender,
                    source=rec["source"],
                    utterance_no=utterance_no,
                    text=rec["text"],
                    audio_path=rec["audio_path"],
                    binary_label=binary,
                    multiclass_label=multi,
                )
            )
        except InvalidField as exc:
            raise InvalidField(f"row {lineno}: {exc}") from None
    return Dataset(tuple(utterances), scheme, language)


def class_distribution(ds: Dataset) -> dict[str, int]:
    """Count utterances per scheme label; every label appears as a key."""
    counts = {label: 0 for label in ds.scheme.labels}
    for u in ds.utterances:
        label = u.label_for(ds.scheme)
        if label is None:
            raise UnlabeledUtterance(f"utterance {u.id!r} has no {ds.scheme.kind.value} label")
        if label not in counts:
            raise UnknownLabel(label)
        counts[label] += 1
    return counts


def _class_seed(seed: int, label: str) -> int:
    # Per-class stream: SHA-256 over (seed LE64 || label UTF-8), first 8
    # bytes, so per-class shuffle order is independent of scheme ordering.
    digest = hashlib.sha256(seed.to_bytes(8, "little") + label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stratified_split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Split into (train, validation) with floor(n_c * fraction) per class.

    Shuffling uses the stdlib Mersenne Twister (random.Random), seeded per
    class from the split seed mixed with a stable hash of the class label.
    Members keep their original manifest order inside each output.
    """
    if spec.stratified:
        groups: dict[str, list[int]] = {label: [] for label in ds.scheme.labels}
        for i, u in enumerate(ds.utterances):
            label = u.label_for(ds.scheme)
            if label is None:
                raise UnlabeledUtterance(
                    f"utterance {u.id!r} has no {ds.scheme.kind.value} label; "
                    "stratified split requires a fully labeled dataset"
                )
            if label not in groups:
                raise UnknownLabel(label)
            groups[label].append(i)
        train_idx: list[int] = []
        val_idx: list[int] = []
        for label, members in groups.items():
            if not members:
                warnings.warn(f"class {label!r} has no members", EmptyClassWarning, stacklevel=2)
                continue
            rng = random.Random(_class_seed(spec.seed, label))
            shuffled = list(members)
            rng.shuffle(shuffled)
            n_train = math.floor(len(members) * spec.train_fraction)
            train_idx.extend(shuffled[:n_train])
            val_idx.extend(shuffled[n_train:])
    else:
        rng = random.Random(spec.seed)
        shuffled = list(range(len(ds.utterances)))
        rng.shuffle(shuffled)
        n_train = math.floor(len(ds.utterances) * spec.train_fraction)
        train_idx = shuffled[:n_train]
        val_idx = shuffled[n_train:]

    train = tuple(ds.utterances[i] for i in sorted(train_idx))
    val = tuple(ds.utterances[i] for i in sorted(val_idx))
    return (
        replace(ds, utterances=train),
        replace(ds, utterances=val),
    )
