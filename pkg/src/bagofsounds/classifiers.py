"""Four classical classifiers behind one train/predict interface.

Multinomial Naive Bayes (real-valued features allowed, treated as
fractional counts), one-vs-rest logistic regression and linear SVM
trained by deterministic full-batch (sub)gradient descent, and a random
forest with per-tree seeded RNG streams.  Everything is deterministic:
identical inputs and config give bit-identical models regardless of
scheduling, and all argmax tie-breaks resolve to the lowest class index.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit, logsumexp

from .audio_features import FeatureMatrix
from .errors import BagOfSoundsError, ConfigError, DataError, ShapeMismatch, UnknownLabel


class NegativeFeature(DataError):
    pass


class NonFiniteFeature(DataError):
    pass


class SingleClassWarning(UserWarning):
    """Training data holds one distinct label; the model is constant."""


class Method(str, Enum):
    NB = "nb"
    SVM = "svm"
    LR = "lr"
    RF = "rf"


class LossKind(str, Enum):
    HINGE = "hinge"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class TrainConfig:
    method: Method
    seed: int = 0
    nb_alpha: float = 1.0
    l2_lambda: float = 1e-4
    max_epochs: int = 200
    learning_rate: float = 0.1
    tolerance: float = 1e-6
    rf_trees: int = 100
    rf_max_depth: Optional[int] = None
    rf_bootstrap: bool = True

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)
        if self.nb_alpha <= 0:
            raise ConfigError(f"nb_alpha must be > 0, got {self.nb_alpha}")
        if self.l2_lambda < 0:
            raise ConfigError(f"l2_lambda must be >= 0, got {self.l2_lambda}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.tolerance < 0:
            raise ConfigError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.rf_trees < 1:
            raise ConfigError(f"rf_trees must be >= 1, got {self.rf_trees}")
        if self.rf_max_depth is not None and self.rf_max_depth < 0:
            raise ConfigError(f"rf_max_depth must be >= 0, got {self.rf_max_depth}")


@dataclass(frozen=True, eq=False)
class NBModel:
    classes: tuple[str, ...]
    class_log_prior: np.ndarray  # (C,)
    feature_log_prob: np.ndarray  # (C, F)

    @property
    def n_features(self) -> int:
        return self.feature_log_prob.shape[1]


@dataclass(frozen=True, eq=False)
class LinearModel:
    classes: tuple[str, ...]
    weights: np.ndarray  # (C, F)
    bias: np.ndarray  # (C,)
    loss: LossKind

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Flat node arrays; feature == -1 marks a leaf.

    `histogram[i]` counts the training samples of each class that reached
    node i, so a leaf's histogram sums to its sample count.
    """

    feature: np.ndarray  # (n_nodes,) int64
    threshold: np.ndarray  # (n_nodes,) float64
    left: np.ndarray  # (n_nodes,) int64
    right: np.ndarray  # (n_nodes,) int64
    histogram: np.ndarray  # (n_nodes, C) float64


@dataclass(frozen=True, eq=False)
class ForestModel:
    classes: tuple[str, ...]
    trees: tuple[DecisionTree, ...]
    n_features: int


TrainedModel = Union[NBModel, LinearModel, ForestModel]


def _as_values(X) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        return X.values
    return np.asarray(X, dtype=np.float64)


def _resolve_classes(y: Sequence[str], classes) -> tuple[str, ...]:
    if classes is None:
        return tuple(sorted(set(y)))
    classes = tuple(classes)
    known = set(classes)
    for label in y:
        if label not in known:
            raise UnknownLabel(label)
    return classes


# --- Naive Bayes ------------------------------------------------------------


def _fit_nb(values, y_idx, classes, cfg: TrainConfig) -> NBModel:
    if np.any(values < 0):
        raise NegativeFeature("multinomial NB requires nonnegative features")
    n, n_features = values.shape
    n_classes = len(classes)
    counts = np.zeros((n_classes, n_features))
    for c in range(n_classes):
        members = values[y_idx == c]
        if members.shape[0]:
            counts[c] = members.sum(axis=0)
    totals = counts.sum(axis=1)
    feature_log_prob = np.log(counts + cfg.nb_alpha) - np.log(
        totals + cfg.nb_alpha * n_features
    )[:, None]
    class_counts = np.bincount(y_idx, minlength=n_classes)
    with np.errstate(divide="ignore"):
        class_log_prior = np.log(class_counts / n)
    return NBModel(classes, class_log_prior, feature_log_prob)


# --- Linear models (one-vs-rest) --------------------------------------------


def logistic_objective(w, b, values, targets, l2_lambda) -> float:
    """(1/n) sum log(1 + exp(-t*s)) + lambda * ||w||^2; bias unregularized."""
    s = values @ w + b
    return float(np.mean(np.logaddexp(0.0, -targets * s)) + l2_lambda * w @ w)


def logistic_gradient(w, b, values, targets, l2_lambda):
    n = values.shape[0]
    s = values @ w + b
    ds = -targets * expit(-targets * s) / n
    return values.T @ ds + 2.0 * l2_lambda * w, float(ds.sum())


def hinge_objective(w, b, values, targets, l2_lambda) -> float:
    """(1/n) sum max(0, 1 - t*s) + lambda * ||w||^2; bias unregularized."""
    s = values @ w + b
    return float(np.mean(np.maximum(0.0, 1.0 - targets * s)) + l2_lambda * w @ w)


def hinge_gradient(w, b, values, targets, l2_lambda):
    n = values.shape[0]
    s = values @ w + b
    active = (1.0 - targets * s) > 0.0
    ds = np.where(active, -targets, 0.0) / n
    return values.T @ ds + 2.0 * l2_lambda * w, float(ds.sum())


def _descend(values, targets, cfg: TrainConfig, objective, gradient):
    """Full-batch descent, step lr0/(1+epoch); stop on |dJ| <= tolerance."""
    w = np.zeros(values.shape[1])
    b = 0.0
    j_prev = objective(w, b, values, targets, cfg.l2_lambda)
    for epoch in range(cfg.max_epochs):
        lr = cfg.learning_rate / (1.0 + epoch)
        gw, gb = gradient(w, b, values, targets, cfg.l2_lambda)
        w = w - lr * gw
        b = b - lr * gb
        j = objective(w, b, values, targets, cfg.l2_lambda)
        if abs(j_prev - j) <= cfg.tolerance:
            break
        j_prev = j
    return w, b


def _fit_linear(values, y_idx, classes, cfg: TrainConfig, loss: LossKind) -> LinearModel:
    objective = logistic_objective if loss is LossKind.LOGISTIC else hinge_objective
    gradient = logistic_gradient if loss is LossKind.LOGISTIC else hinge_gradient
    weights = np.zeros((len(classes), values.shape[1]))
    bias = np.zeros(len(classes))
    for c in range(len(classes)):
        targets = np.where(y_idx == c, 1.0, -1.0)
        weights[c], bias[c] = _descend(values, targets, cfg, objective, gradient)
    if not (np.isfinite(weights).all() and np.isfinite(bias).all()):
        raise BagOfSoundsError(
            "gradient descent diverged to non-finite weights; lower learning_rate"
        )
    return LinearModel(classes, weights, bias, loss)


# --- Random forest ----------------------------------------------------------


def bootstrap_indices(seed: int, tree_index: int, n: int) -> np.ndarray:
    """The exact bootstrap rows tree `tree_index` trains on (with replacement)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, tree_index]))
    return rng.integers(0, n, n)


def gini_impurity(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - (p * p).sum())


def _best_threshold(xcol, y_node, n_classes):
    """Best (weighted child Gini, midpoint threshold) for one feature, or None."""
    order = np.argsort(xcol, kind="stable")
    xs = xcol[order]
    boundaries = np.nonzero(xs[:-1] != xs[1:])[0]
    if boundaries.size == 0:
        return None
    n_node = xs.size
    onehot = np.zeros((n_node, n_classes))
    onehot[np.arange(n_node), y_node[order]] = 1.0
    cum = np.cumsum(onehot, axis=0)
    left = cum[boundaries]
    right = cum[-1] - left
    n_left = (boundaries + 1).astype(np.float64)
    n_right = n_node - n_left
    gini_left = 1.0 - ((left / n_left[:, None]) ** 2).sum(axis=1)
    gini_right = 1.0 - ((right / n_right[:, None]) ** 2).sum(axis=1)
    weighted = (n_left * gini_left + n_right * gini_right) / n_node
    b = int(np.argmin(weighted))  # ties: lowest threshold
    threshold = (xs[boundaries[b]] + xs[boundaries[b] + 1]) / 2.0
    return float(weighted[b]), threshold


def _grow_tree(values, y_idx, n_classes, rng, cfg: TrainConfig) -> DecisionTree:
    n, n_features = values.shape
    k = max(1, math.floor(math.sqrt(n_features)))
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    hist: list[np.ndarray] = []

    def new_node(counts) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        hist.append(counts)
        return len(feature) - 1

    # Stack of (sample indices, depth, parent id, is_left_child).
    stack = [(np.arange(n), 0, -1, False)]
    while stack:
        samples, depth, parent, is_left = stack.pop()
        counts = np.bincount(y_idx[samples], minlength=n_classes).astype(np.float64)
        node = new_node(counts)
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node
        pure = np.count_nonzero(counts) <= 1
        depth_capped = cfg.rf_max_depth is not None and depth >= cfg.rf_max_depth
        if pure or depth_capped or samples.size < 2:
            continue
        perm = rng.permutation(n_features)
        y_node = y_idx[samples]
        best = None  # (weighted gini, feature, threshold)
        for f in perm[:k]:
            cand = _best_threshold(values[samples, f], y_node, n_classes)
            if cand is not None and (best is None or cand[0] < best[0]):
                best = (cand[0], int(f), cand[1])
        if best is None:
            # Sampled features were all constant here; fall back to the rest.
            for f in perm[k:]:
                cand = _best_threshold(values[samples, f], y_node, n_classes)
                if cand is not None:
                    best = (cand[0], int(f), cand[1])
                    break
        if best is None:
            continue
        _, f, thr = best
        go_left = values[samples, f] <= thr
        feature[node] = f
        threshold[node] = thr
        # Right pushed first so the left child is grown (and numbered) first.
        stack.append((samples[~go_left], depth + 1, node, False))
        stack.append((samples[go_left], depth + 1, node, True))

    return DecisionTree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.vstack(hist),
    )


def _fit_forest(values, y_idx, classes, cfg: TrainConfig) -> ForestModel:
    n = values.shape[0]
    trees = []
    for j in range(cfg.rf_trees):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, j]))
        if cfg.rf_bootstrap:
            rows = rng.integers(0, n, n)
        else:
            rows = np.arange(n)
        trees.append(_grow_tree(values[rows], y_idx[rows], len(classes), rng, cfg))
    return ForestModel(classes, tuple(trees), values.shape[1])


def _tree_votes(tree: DecisionTree, values: np.ndarray) -> np.ndarray:
    """Predicted class index per row: argmax of the reached leaf histogram."""
    out = np.empty(values.shape[0], dtype=np.int64)
    for i in range(values.shape[0]):
        node = 0
        while tree.feature[node] >= 0:
            if values[i, tree.feature[node]] <= tree.threshold[node]:
                node = tree.left[node]
            else:
                node = tree.right[node]
        out[i] = int(np.argmax(tree.histogram[node]))
    return out


# --- Shared interface -------------------------------------------------------


def train(X, y: Sequence[str], cfg: TrainConfig, classes=None) -> TrainedModel:
    """Fit cfg.method on (X, y); `classes` fixes the score column order.

    When `classes` is omitted the distinct labels of y are used in sorted
    order.  Classes with no training members are allowed: NB assigns them
    a -inf prior, one-vs-rest learners see an all-negative target, and
    the forest never votes for them.
    """
    values = _as_values(X)
    y = list(y)
    if values.ndim != 2 or values.shape[0] != len(y):
        raise ShapeMismatch(
            f"feature matrix has {values.shape[0]} rows for {len(y)} labels"
        )
    if len(y) < 2:
        raise DataError(f"training requires at least 2 samples, got {len(y)}")
    if not np.isfinite(values).all():
        raise NonFiniteFeature("feature matrix contains NaN or infinity")
    classes = _resolve_classes(y, classes)
    if len(set(y)) == 1:
        warnings.warn(
            f"all training labels are {y[0]!r}; the model will be constant",
            SingleClassWarning,
            stacklevel=2,
        )
    index = {label: i for i, label in enumerate(classes)}
    y_idx = np.asarray([index[label] for label in y], dtype=np.int64)
    if cfg.method is Method.NB:
        return _fit_nb(values, y_idx, classes, cfg)
    if cfg.method is Method.LR:
        return _fit_linear(values, y_idx, classes, cfg, LossKind.LOGISTIC)
    if cfg.method is Method.SVM:
        return _fit_linear(values, y_idx, classes, cfg, LossKind.HINGE)
    return _fit_forest(values, y_idx, classes, cfg)


def _check_features(model: TrainedModel, values: np.ndarray) -> None:
    if values.ndim != 2 or values.shape[1] != model.n_features:
        raise ShapeMismatch(
            f"input has {values.shape[1] if values.ndim == 2 else '?'} features, "
            f"model expects {model.n_features}"
        )


def predict_scores(model: TrainedModel, X) -> np.ndarray:
    """Per-row class scores, columns in model.classes order.

    NB gives normalized log posteriors (exp of a row sums to 1), LR gives
    sigmoid scores, SVM raw margins, RF the fraction of trees voting for
    each class.
    """
    values = _as_values(X)
    _check_features(model, values)
    if isinstance(model, NBModel):
        joint = model.class_log_prior[None, :] + values @ model.feature_log_prob.T
        return joint - logsumexp(joint, axis=1, keepdims=True)
    if isinstance(model, LinearModel):
        margins = values @ model.weights.T + model.bias[None, :]
        if model.loss is LossKind.LOGISTIC:
            return expit(margins)
        return margins
    votes = np.zeros((values.shape[0], len(model.classes)))
    for tree in model.trees:
        picks = _tree_votes(tree, values)
        votes[np.arange(values.shape[0]), picks] += 1.0
    return votes / len(model.trees)


def predict(model: TrainedModel, X) -> list[str]:
    """Argmax of predict_scores; ties break to the lowest class index."""
    scores = predict_scores(model, X)
    if scores.shape[0] == 0:
        return []
    picks = np.argmax(scores, axis=1)
    return [model.classes[i] for i in picks]
