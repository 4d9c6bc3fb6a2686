"""Command-line interface: train, sweep, predict, report, inspect.

Configuration comes from built-in defaults, overridden by a JSON config
file (--config), overridden by explicit flags.  Exit codes: 0 success,
1 usage or invalid configuration, 2 bad input data, 3 internal error.
Failures print a one-line machine-readable JSON object to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .bundle import ModelBundle, bundle_predict, load_bundle, save_bundle
from .classifiers import Method, TrainConfig, predict, train
from .corpus import (
    MULTICLASS_LABELS,
    Dataset,
    LabelScheme,
    SchemeKind,
    SplitSpec,
    UnlabeledUtterance,
    class_distribution,
    load_manifest,
    stratified_split,
)
from .errors import BagOfSoundsError, ConfigError, DataError
from .evaluation import (
    ClassificationReport,
    METHOD_ORDER,
    MODALITY_ORDER,
    TASK_ORDER,
    confusion,
    format_report_text,
    format_summary_text,
    report,
    report_to_csv,
    summary_to_csv,
    sweep_summary,
)
from .pipeline import AudioConfig, Modality, SpeechFeaturizer, TextFeaturizer


class UsageError(ConfigError):
    """Bad flags, unknown subcommand, or an unusable config file."""


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one training run."""

    manifest_path: str
    task: SchemeKind
    modality: Modality
    method: Method
    split: SplitSpec
    audio: AudioConfig
    train: TrainConfig
    output_dir: Optional[str]
    language: str
    cache_dir: Optional[str] = None
    multiclass_labels: tuple[str, ...] = MULTICLASS_LABELS

    def scheme(self) -> LabelScheme:
        if self.task is SchemeKind.BINARY:
            return LabelScheme.binary()
        return LabelScheme.multiclass(self.multiclass_labels)


# --- Config resolution ------------------------------------------------------

_TOP_KEYS = {
    "task",
    "modality",
    "method",
    "seed",
    "language",
    "split",
    "train",
    "audio",
    "multiclass_labels",
}
_SPLIT_KEYS = {"train_fraction", "seed", "stratified"}
_TRAIN_KEYS = {
    "seed",
    "nb_alpha",
    "l2_lambda",
    "max_epochs",
    "learning_rate",
    "tolerance",
    "rf_trees",
    "rf_max_depth",
    "rf_bootstrap",
}
_AUDIO_KEYS = {
    "sample_rate_hz",
    "frame_length",
    "hop_length",
    "window",
    "n_mels",
    "fmin_hz",
    "fmax_hz",
    "normalize",
}


def _load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    _check_keys(doc, _TOP_KEYS, "config")
    _check_keys(doc.get("split", {}), _SPLIT_KEYS, "config key 'split'")
    _check_keys(doc.get("train", {}), _TRAIN_KEYS, "config key 'train'")
    _check_keys(doc.get("audio", {}), _AUDIO_KEYS, "config key 'audio'")
    return doc


def _check_keys(doc, allowed, where) -> None:
    if not isinstance(doc, dict):
        raise UsageError(f"{where} must be a JSON object")
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise UsageError(f"{where} has unknown keys: {', '.join(unknown)}")


def _build_run_config(args, manifest_path: str) -> RunConfig:
    file_cfg = _load_config_file(args.config) if args.config else {}
    task = getattr(args, "task", None) or file_cfg.get("task") or "binary"
    modality = getattr(args, "modality", None) or file_cfg.get("modality") or "text"
    method = getattr(args, "method", None) or file_cfg.get("method")
    if method is None:
        raise UsageError("no method given: pass --method or set 'method' in the config")
    flag_seed = getattr(args, "seed", None)
    base_seed = flag_seed if flag_seed is not None else file_cfg.get("seed", 0)
    split_doc = dict(file_cfg.get("split", {}))
    train_doc = dict(file_cfg.get("train", {}))
    split_seed = flag_seed if flag_seed is not None else split_doc.pop("seed", base_seed)
    train_seed = flag_seed if flag_seed is not None else train_doc.pop("seed", base_seed)
    split_doc.pop("seed", None)
    try:
        task = SchemeKind(task)
        modality = Modality(modality)
        method = Method(method)
        split = SplitSpec(seed=split_seed, **split_doc)
        train_cfg = TrainConfig(method=method, seed=train_seed, **train_doc)
        audio = AudioConfig(**file_cfg.get("audio", {}))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
    language = (
        getattr(args, "language", None)
        or file_cfg.get("language")
        or Path(manifest_path).stem
    )
    multiclass_labels = tuple(file_cfg.get("multiclass_labels", MULTICLASS_LABELS))
    return RunConfig(
        manifest_path=manifest_path,
        task=task,
        modality=modality,
        method=method,
        split=split,
        audio=audio,
        train=train_cfg,
        output_dir=getattr(args, "out", None),
        language=language,
        cache_dir=getattr(args, "cache_dir", None),
        multiclass_labels=multiclass_labels,
    )


# --- Shared run pieces ------------------------------------------------------


def _labels_of(ds: Dataset, scheme: LabelScheme) -> list[str]:
    labels = []
    for u in ds.utterances:
        label = u.label_for(scheme)
        if label is None:
            raise UnlabeledUtterance(
                f"utterance {u.id!r} has no {scheme.kind.value} label"
            )
        labels.append(label)
    return labels


def _fit_featurizer(cfg: RunConfig, train_ds: Dataset, base_dir):
    if cfg.modality is Modality.TEXT:
        return TextFeaturizer.fit(train_ds.utterances)
    return SpeechFeaturizer.fit(
        train_ds.utterances, cfg.audio, base_dir=base_dir, cache_dir=cfg.cache_dir
    )


def _transform(cfg: RunConfig, featurizer, ds: Dataset, base_dir):
    if cfg.modality is Modality.TEXT:
        return featurizer.transform(ds.utterances)
    return featurizer.transform(ds.utterances, base_dir=base_dir, cache_dir=cfg.cache_dir)


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# --- Subcommands ------------------------------------------------------------


def cmd_train(cfg: RunConfig) -> tuple[ModelBundle, ClassificationReport]:
    """Split, fit the featurizer on train only, train, evaluate, persist."""
    scheme = cfg.scheme()
    ds = load_manifest(cfg.manifest_path, scheme, language=cfg.language)
    base_dir = Path(cfg.manifest_path).parent
    train_ds, val_ds = stratified_split(ds, cfg.split)
    featurizer, x_train = _fit_featurizer(cfg, train_ds, base_dir)
    y_train = _labels_of(train_ds, scheme)
    model = train(x_train, y_train, cfg.train, classes=scheme.labels)
    x_val = _transform(cfg, featurizer, val_ds, base_dir)
    y_val = _labels_of(val_ds, scheme)
    y_pred = predict(model, x_val)
    rep = report(confusion(y_val, y_pred, scheme))
    bundle = ModelBundle(
        scheme=scheme,
        modality=cfg.modality,
        language=cfg.language,
        split=cfg.split,
        train_config=cfg.train,
        featurizer=featurizer,
        model=model,
    )
    if cfg.output_dir is not None:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_bundle(bundle, out / "bundle.json")
        _write_text(out / "report.csv", report_to_csv(rep))
        _write_text(out / "report.txt", format_report_text(rep))
    return bundle, rep


def cmd_sweep(manifests: dict[str, str], args) -> "SweepResult":
    """Train every (task, modality, method) cell per language manifest.

    Per-cell failures are recorded in the summary and the run continues.
    """
    reports = {}
    failures = {}
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for language in sorted(manifests):
        manifest_path = manifests[language]
        for task in TASK_ORDER:
            for modality in MODALITY_ORDER:
                cell_cfgs = {}
                for method in METHOD_ORDER:
                    ns = argparse.Namespace(
                        task=task,
                        modality=modality,
                        method=method,
                        seed=getattr(args, "seed", None),
                        config=getattr(args, "config", None),
                        language=language,
                        out=None,
                        cache_dir=getattr(args, "cache_dir", None),
                    )
                    cell_cfgs[method] = _build_run_config(ns, manifest_path)
                shared = None  # (scheme, split pair, featurizer, matrices, labels)
                for method in METHOD_ORDER:
                    key = (language, task, modality, method)
                    cfg = cell_cfgs[method]
                    try:
                        if shared is None:
                            scheme = cfg.scheme()
                            ds = load_manifest(manifest_path, scheme, language=language)
                            base_dir = Path(manifest_path).parent
                            train_ds, val_ds = stratified_split(ds, cfg.split)
                            featurizer, x_train = _fit_featurizer(cfg, train_ds, base_dir)
                            x_val = _transform(cfg, featurizer, val_ds, base_dir)
                            shared = (
                                scheme,
                                featurizer,
                                x_train,
                                _labels_of(train_ds, scheme),
                                x_val,
                                _labels_of(val_ds, scheme),
                            )
                        scheme, featurizer, x_train, y_train, x_val, y_val = shared
                        model = train(x_train, y_train, cfg.train, classes=scheme.labels)
                        y_pred = predict(model, x_val)
                        rep = report(confusion(y_val, y_pred, scheme))
                        reports[key] = rep
                        if out is not None:
                            stem = f"{language}_{task}_{modality}_{method}"
                            save_bundle(
                                ModelBundle(
                                    scheme=scheme,
                                    modality=cfg.modality,
                                    language=language,
                                    split=cfg.split,
                                    train_config=cfg.train,
                                    featurizer=featurizer,
                                    model=model,
                                ),
                                out / f"{stem}.bundle.json",
                            )
                            _write_text(out / f"{stem}.report.csv", report_to_csv(rep))
                    except Exception as exc:  # recorded, sweep continues
                        failures[key] = f"{type(exc).__name__}: {exc}"
    summary = sweep_summary(reports, failures)
    if out is not None:
        _write_text(out / "summary.txt", format_summary_text(summary))
        _write_text(out / "summary.csv", summary_to_csv(summary))
    return SweepResult(summary, reports, failures)


@dataclass(frozen=True, eq=False)
class SweepResult:
    summary: object
    reports: dict
    failures: dict


def cmd_predict(bundle_path, manifest_path, out_dir=None, cache_dir=None) -> str:
    """Predict labels for a manifest; returns the CSV text it wrote."""
    bundle = load_bundle(bundle_path)
    ds = load_manifest(manifest_path, bundle.scheme)
    base_dir = Path(manifest_path).parent
    labels = bundle_predict(bundle, ds.utterances, base_dir=base_dir, cache_dir=cache_dir)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "predicted_label"])
    for u, label in zip(ds.utterances, labels):
        writer.writerow([u.id, label])
    text = buf.getvalue()
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_text(out / "predictions.csv", text)
    return text


def cmd_report(bundle_path, manifest_path, out_dir=None, cache_dir=None) -> ClassificationReport:
    """Score a manifest with gold labels against a saved bundle."""
    bundle = load_bundle(bundle_path)
    ds = load_manifest(manifest_path, bundle.scheme)
    gold = _labels_of(ds, bundle.scheme)
    base_dir = Path(manifest_path).parent
    preds = bundle_predict(bundle, ds.utterances, base_dir=base_dir, cache_dir=cache_dir)
    rep = report(confusion(gold, preds, bundle.scheme))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_text(out / "report.csv", report_to_csv(rep))
        _write_text(out / "report.txt", format_report_text(rep))
    return rep


def cmd_inspect(cfg: RunConfig) -> str:
    """Class distribution plus the feature shape of the chosen modality."""
    scheme = cfg.scheme()
    ds = load_manifest(cfg.manifest_path, scheme, language=cfg.language)
    lines = [f"utterances: {len(ds)}"]
    for label, count in class_distribution(ds).items():
        lines.append(f"class {label}: {count}")
    if cfg.modality is Modality.TEXT:
        featurizer, matrix = TextFeaturizer.fit(ds.utterances)
        lines.append(f"text features: {matrix.n_samples} x {matrix.n_features}")
    else:
        base_dir = Path(cfg.manifest_path).parent
        featurizer, matrix = SpeechFeaturizer.fit(
            ds.utterances, cfg.audio, base_dir=base_dir, cache_dir=cfg.cache_dir
        )
        lines.append(
            f"speech features: {matrix.n_samples} x {matrix.n_features} "
            f"({cfg.audio.n_mels} mels x {featurizer.pad_frames} frames)"
        )
    return "\n".join(lines) + "\n"


# --- Argument parsing and dispatch ------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="bagofsounds", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, help="seed for both the split and training")
        p.add_argument("--out", help="output directory")
        p.add_argument("--cache-dir", dest="cache_dir", help="spectrogram cache directory")

    p_train = sub.add_parser("train", help="train one model and evaluate the split")
    p_train.add_argument("--manifest", required=True)
    p_train.add_argument("--task", choices=[k.value for k in SchemeKind])
    p_train.add_argument("--modality", choices=[m.value for m in Modality])
    p_train.add_argument("--method", choices=[m.value for m in Method])
    p_train.add_argument("--language", help="language name (default: manifest stem)")
    common(p_train)
    p_train.set_defaults(handler=_run_train)

    p_sweep = sub.add_parser("sweep", help="train every task/modality/method cell")
    p_sweep.add_argument(
        "--manifest",
        action="append",
        required=True,
        metavar="LANG=PATH",
        help="repeatable; one manifest per language",
    )
    common(p_sweep)
    p_sweep.set_defaults(handler=_run_sweep)

    p_predict = sub.add_parser("predict", help="apply a saved bundle to a manifest")
    p_predict.add_argument("--bundle", required=True)
    p_predict.add_argument("--manifest", required=True)
    common(p_predict)
    p_predict.set_defaults(handler=_run_predict)

    p_report = sub.add_parser("report", help="score a gold-labeled manifest")
    p_report.add_argument("--bundle", required=True)
    p_report.add_argument("--manifest", required=True)
    common(p_report)
    p_report.set_defaults(handler=_run_report)

    p_inspect = sub.add_parser("inspect", help="print class counts and feature shapes")
    p_inspect.add_argument("--manifest", required=True)
    p_inspect.add_argument("--task", choices=[k.value for k in SchemeKind])
    p_inspect.add_argument("--modality", choices=[m.value for m in Modality])
    p_inspect.add_argument("--language")
    common(p_inspect)
    p_inspect.set_defaults(handler=_run_inspect)
    return parser


def _run_train(args) -> int:
    cfg = _build_run_config(args, args.manifest)
    _bundle, rep = cmd_train(cfg)
    print(f"validation macro F1: {rep.macro_f1:.4f}")
    if cfg.output_dir is not None:
        print(f"wrote bundle and reports to {cfg.output_dir}")
    return 0


def _parse_sweep_manifests(values) -> dict[str, str]:
    manifests = {}
    for value in values:
        if "=" not in value:
            raise UsageError(
                f"sweep --manifest takes LANG=PATH, got {value!r}"
            )
        language, _, path = value.partition("=")
        if not language or not path:
            raise UsageError(f"sweep --manifest takes LANG=PATH, got {value!r}")
        if language in manifests:
            raise UsageError(f"duplicate language {language!r} in --manifest flags")
        manifests[language] = path
    return manifests


def _run_sweep(args) -> int:
    result = cmd_sweep(_parse_sweep_manifests(args.manifest), args)
    print(format_summary_text(result.summary), end="")
    return 0


def _run_predict(args) -> int:
    text = cmd_predict(args.bundle, args.manifest, args.out, args.cache_dir)
    if args.out is None:
        print(text, end="")
    return 0


def _run_report(args) -> int:
    rep = cmd_report(args.bundle, args.manifest, args.out, args.cache_dir)
    print(format_report_text(rep), end="")
    return 0


def _run_inspect(args) -> int:
    ns = argparse.Namespace(**vars(args))
    if ns.modality is None:
        ns.modality = "text"
    if getattr(ns, "method", None) is None:
        ns.method = "nb"  # inspect never trains; any valid method placeholder
    cfg = _build_run_config(ns, args.manifest)
    print(cmd_inspect(cfg), end="")
    return 0


def _emit_error(exc: BaseException, exit_code: int) -> None:
    doc = {
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": exit_code,
    }
    print(json.dumps(doc, ensure_ascii=False), file=sys.stderr)


def main(argv=None) -> int:
    try:
        parser = _build_parser()
        args = parser.parse_args(argv)
        return args.handler(args)
    except SystemExit as exc:  # argparse --help path
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 1
    except UsageError as exc:
        _emit_error(exc, 1)
        return 1
    except ConfigError as exc:
        _emit_error(exc, 1)
        return 1
    except DataError as exc:
        _emit_error(exc, 2)
        return 2
    except BagOfSoundsError as exc:
        _emit_error(exc, 3)
        return 3
    except Exception as exc:
        _emit_error(exc, 3)
        return 3


def entrypoint() -> None:
    sys.exit(main())
