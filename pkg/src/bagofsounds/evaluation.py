"""Scoring: confusion matrices, per-class P/R/F1, macro F1, sweep grids.

Macro F1 is the unweighted mean of per-class F1 over every scheme class,
including zero-support ones, with the 0/0 -> 0 convention at each stage.
The sweep summary lays macro F1 out as one grid per task with languages
as rows and method x modality pairs as columns, flagging per-row maxima
and reporting missing rubric cells.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .corpus import DEFAULT_LANGUAGES, LabelScheme
from .errors import DataError, UnknownLabel

METHOD_ORDER = ("nb", "svm", "lr", "rf")
MODALITY_ORDER = ("text", "speech")
TASK_ORDER = ("binary", "multiclass")


class LengthMismatch(DataError):
    pass


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    scheme: LabelScheme
    counts: np.ndarray  # classes x classes, rows = truth, cols = predicted

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True, eq=False)
class ClassificationReport:
    labels: tuple[str, ...]
    per_class: dict[str, ClassMetrics]
    macro_f1: float


def confusion(y_true: Sequence[str], y_pred: Sequence[str], scheme: LabelScheme) -> ConfusionMatrix:
    if len(y_true) != len(y_pred):
        raise LengthMismatch(
            f"{len(y_true)} gold labels vs {len(y_pred)} predictions"
        )
    index = {label: i for i, label in enumerate(scheme.labels)}
    counts = np.zeros((len(index), len(index)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if t not in index:
            raise UnknownLabel(t)
        if p not in index:
            raise UnknownLabel(p)
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(scheme, counts)


def _safe_div(num: float, den: float) -> float:
    return float(num / den) if den > 0 else 0.0


def report(cm: ConfusionMatrix) -> ClassificationReport:
    """Per-class precision/recall/F1 plus macro F1 over all scheme classes."""
    labels = cm.scheme.labels
    tp = np.diag(cm.counts).astype(np.float64)
    row_sums = cm.counts.sum(axis=1).astype(np.float64)  # truth counts
    col_sums = cm.counts.sum(axis=0).astype(np.float64)  # prediction counts
    per_class = {}
    f1s = []
    for i, label in enumerate(labels):
        precision = _safe_div(tp[i], col_sums[i])
        recall = _safe_div(tp[i], row_sums[i])
        f1 = _safe_div(2.0 * precision * recall, precision + recall)
        per_class[label] = ClassMetrics(precision, recall, f1, int(row_sums[i]))
        f1s.append(f1)
    return ClassificationReport(tuple(labels), per_class, float(np.mean(f1s)))


# --- Report serialization ---------------------------------------------------

_MACRO_ROW = "macro_f1"


def report_to_csv(rep: ClassificationReport) -> str:
    """Full-precision CSV: one row per class, then a macro_f1 row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "precision", "recall", "f1", "support"])
    for label in rep.labels:
        m = rep.per_class[label]
        writer.writerow([label, repr(m.precision), repr(m.recall), repr(m.f1), m.support])
    writer.writerow([_MACRO_ROW, "", "", repr(rep.macro_f1), ""])
    return buf.getvalue()


def report_from_csv(text: str) -> ClassificationReport:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != ["label", "precision", "recall", "f1", "support"]:
        raise DataError(f"unrecognized report header: {header}")
    labels = []
    per_class = {}
    macro = None
    for row in reader:
        if not row:
            continue
        if row[0] == _MACRO_ROW:
            macro = float(row[3])
            continue
        labels.append(row[0])
        per_class[row[0]] = ClassMetrics(
            float(row[1]), float(row[2]), float(row[3]), int(row[4])
        )
    if macro is None:
        raise DataError("report CSV is missing the macro_f1 row")
    return ClassificationReport(tuple(labels), per_class, macro)


def format_report_text(rep: ClassificationReport) -> str:
    """Aligned two-decimal table: class rows, then the macro F1 line."""
    headers = ["class", "precision", "recall", "f1", "support"]
    rows = [
        [
            label,
            f"{rep.per_class[label].precision:.2f}",
            f"{rep.per_class[label].recall:.2f}",
            f"{rep.per_class[label].f1:.2f}",
            str(rep.per_class[label].support),
        ]
        for label in rep.labels
    ]
    widths = [
        max(len(headers[j]), *(len(r[j]) for r in rows)) if rows else len(headers[j])
        for j in range(len(headers))
    ]
    lines = ["  ".join(h.ljust(widths[j]) for j, h in enumerate(headers))]
    for r in rows:
        lines.append("  ".join(r[j].ljust(widths[j]) for j in range(len(headers))))
    lines.append(f"macro F1: {rep.macro_f1:.2f}")
    return "\n".join(lines) + "\n"


# --- Sweep summary ----------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
    value: Optional[float]  # macro F1; None when missing or failed
    best: bool = False
    error: Optional[str] = None


@dataclass(frozen=True)
class SweepSummary:
    languages: tuple[str, ...]
    columns: tuple[tuple[str, str], ...]  # (method, modality) pairs
    grids: dict[str, tuple[tuple[SweepCell, ...], ...]]  # task -> rows
    missing: tuple[tuple[str, str, str, str], ...]  # (language, task, modality, method)

    @property
    def n_expected(self) -> int:
        return len(TASK_ORDER) * len(self.languages) * len(MODALITY_ORDER) * len(METHOD_ORDER)

    @property
    def n_present(self) -> int:
        return self.n_expected - len(self.missing)


def _plain(value) -> str:
    return getattr(value, "value", value)


def sweep_summary(
    reports: Mapping[tuple, Union[ClassificationReport, float]],
    failures: Optional[Mapping[tuple, str]] = None,
) -> SweepSummary:
    """Arrange macro F1 per (language, task, modality, method) into grids.

    The expected rubric is every combination of task, modality, and method
    over the union of the default three languages and any language seen in
    the input, so an empty input reports all 48 default cells missing.
    Cells in `failures` count as present but carry an error note.
    """
    failures = dict(failures or {})
    values: dict[tuple[str, str, str, str], float] = {}
    for key, rep in reports.items():
        language, task, modality, method = key
        norm = (language, _plain(task), _plain(modality), _plain(method))
        values[norm] = rep.macro_f1 if isinstance(rep, ClassificationReport) else float(rep)
    errors = {}
    for key, message in failures.items():
        language, task, modality, method = key
        errors[(language, _plain(task), _plain(modality), _plain(method))] = message

    observed = {k[0] for k in values} | {k[0] for k in errors}
    extras = sorted(observed - set(DEFAULT_LANGUAGES))
    languages = tuple(DEFAULT_LANGUAGES) + tuple(extras)
    columns = tuple((m, mod) for m in METHOD_ORDER for mod in MODALITY_ORDER)

    grids = {}
    missing = []
    for task in TASK_ORDER:
        rows = []
        for language in languages:
            row_values = []
            for method, modality in columns:
                key = (language, task, modality, method)
                if key in values:
                    row_values.append(values[key])
                else:
                    row_values.append(None)
                    if key not in errors:
                        missing.append((language, task, modality, method))
            present = [v for v in row_values if v is not None]
            best = max(present) if present else None
            cells = []
            for (method, modality), v in zip(columns, row_values):
                err = errors.get((language, task, modality, method))
                cells.append(SweepCell(v, best=(v is not None and v == best), error=err))
            rows.append(tuple(cells))
        grids[task] = tuple(rows)
    return SweepSummary(languages, columns, grids, tuple(missing))


def format_summary_text(summary: SweepSummary) -> str:
    """One aligned grid per task; per-row maxima are starred, gaps are --."""
    lines = []
    col_names = [f"{m}/{mod}" for m, mod in summary.columns]
    for task in TASK_ORDER:
        lines.append(f"{task} (macro F1)")
        rows = []
        for language, cells in zip(summary.languages, summary.grids[task]):
            rendered = []
            for cell in cells:
                if cell.error is not None:
                    rendered.append("ERR")
                elif cell.value is None:
                    rendered.append("--")
                else:
                    rendered.append(f"{cell.value:.2f}" + ("*" if cell.best else ""))
            rows.append([language] + rendered)
        headers = ["language"] + col_names
        widths = [
            max(len(headers[j]), *(len(r[j]) for r in rows))
            for j in range(len(headers))
        ]
        lines.append("  ".join(h.ljust(widths[j]) for j, h in enumerate(headers)))
        for r in rows:
            lines.append("  ".join(r[j].ljust(widths[j]) for j in range(len(headers))))
        lines.append("")
    if summary.missing:
        lines.append(f"missing cells: {len(summary.missing)} of {summary.n_expected}")
        for language, task, modality, method in summary.missing:
            lines.append(f"  {language} {task} {modality} {method}")
    else:
        lines.append(f"all {summary.n_expected} rubric cells present")
    return "\n".join(lines) + "\n"


def summary_to_csv(summary: SweepSummary) -> str:
    """Long-form full-precision CSV, one row per rubric cell."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["task", "language", "method", "modality", "macro_f1", "best", "status"])
    for task in TASK_ORDER:
        for language, cells in zip(summary.languages, summary.grids[task]):
            for (method, modality), cell in zip(summary.columns, cells):
                if cell.error is not None:
                    status = "failed"
                elif cell.value is None:
                    status = "missing"
                else:
                    status = "ok"
                writer.writerow(
                    [
                        task,
                        language,
                        method,
                        modality,
                        "" if cell.value is None else repr(cell.value),
                        "1" if cell.best else "0",
                        status,
                    ]
                )
    return buf.getvalue()
