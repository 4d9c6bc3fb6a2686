"""Naive Bayes, linear models, random forest: oracles and properties."""

import math
import warnings

import numpy as np
import pytest
from scipy.special import logsumexp

from bagofsounds.classifiers import (
    DecisionTree,
    ForestModel,
    LinearModel,
    Method,
    NBModel,
    NegativeFeature,
    NonFiniteFeature,
    SingleClassWarning,
    TrainConfig,
    bootstrap_indices,
    hinge_gradient,
    hinge_objective,
    logistic_gradient,
    logistic_objective,
    predict,
    predict_scores,
    train,
)
from bagofsounds.errors import ConfigError, DataError, ShapeMismatch


def nb_cfg(**kw):
    return TrainConfig(method=Method.NB, **kw)


class TestNaiveBayes:
    def test_smoothing_worked_example(self):
        # Class A counts [4, 0], class B counts [0, 4], alpha 1:
        # P(t|A) = (4+1)/(4+2) = 5/6 and (0+1)/(4+2) = 1/6.
        X = np.array([[4.0, 0.0], [0.0, 4.0]])
        model = train(X, ["A", "B"], nb_cfg())
        np.testing.assert_allclose(
            model.feature_log_prob[0], [math.log(5 / 6), math.log(1 / 6)], atol=1e-12
        )
        np.testing.assert_allclose(
            model.feature_log_prob[1], [math.log(1 / 6), math.log(5 / 6)], atol=1e-12
        )
        np.testing.assert_allclose(model.class_log_prior, math.log(0.5), atol=1e-12)

    def test_predict_worked_example(self):
        X = np.array([[4.0, 0.0], [0.0, 4.0]])
        model = train(X, ["A", "B"], nb_cfg())
        assert predict(model, np.array([[3.0, 0.0]])) == ["A"]

    def test_distribution_normalization_invariants(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(0, 3, (20, 6))
        y = ["A"] * 7 + ["B"] * 13
        model = train(X, y, nb_cfg())
        np.testing.assert_allclose(
            np.exp(model.feature_log_prob).sum(axis=1), 1.0, atol=1e-9
        )
        assert np.exp(model.class_log_prior).sum() == pytest.approx(1.0, abs=1e-9)

    def test_scores_exponentiate_to_one(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(0, 2, (12, 4))
        y = ["A", "B", "C"] * 4
        model = train(X, y, nb_cfg())
        scores = predict_scores(model, rng.uniform(0, 2, (5, 4)))
        np.testing.assert_allclose(np.exp(scores).sum(axis=1), 1.0, atol=1e-9)

    def test_negative_features_rejected(self):
        X = np.array([[1.0, -0.1], [0.5, 0.2]])
        with pytest.raises(NegativeFeature):
            train(X, ["A", "B"], nb_cfg())

    def test_matches_brute_force_bayes(self):
        # Enumerate the smoothing formula directly on integer counts.
        rng = np.random.default_rng(77)
        for _ in range(30):
            n_features = int(rng.integers(1, 6))
            n_classes = int(rng.integers(2, 4))
            labels = [chr(ord("A") + i) for i in range(n_classes)]
            n = int(rng.integers(n_classes, 15))
            y = [labels[i % n_classes] for i in range(n)]
            X = rng.integers(0, 5, (n, n_features)).astype(float)
            alpha = float(rng.choice([0.5, 1.0, 2.0]))
            model = train(X, y, nb_cfg(nb_alpha=alpha))
            queries = rng.integers(0, 5, (4, n_features)).astype(float)
            expected = np.zeros((4, n_classes))
            for c, label in enumerate(labels):
                rows = X[[yy == label for yy in y]]
                counts = rows.sum(axis=0)
                total = counts.sum()
                log_prob = np.log(
                    (counts + alpha) / (total + alpha * n_features)
                )
                prior = math.log(rows.shape[0] / n)
                expected[:, c] = prior + queries @ log_prob
            expected -= logsumexp(expected, axis=1, keepdims=True)
            np.testing.assert_allclose(
                predict_scores(model, queries), expected, atol=1e-12
            )

    def test_row_scaling_leaves_argmax_alone(self):
        # Balanced classes so priors cancel; scaling a query row by any
        # positive constant scales all class log-likelihood gaps equally.
        rng = np.random.default_rng(11)
        X = rng.uniform(0, 4, (16, 5))
        y = ["A"] * 8 + ["B"] * 8
        model = train(X, y, nb_cfg())
        queries = rng.uniform(0.1, 3, (10, 5))
        base = predict(model, queries)
        for scale in (0.25, 3.0, 17.5):
            assert predict(model, queries * scale) == base

    def test_empty_class_gets_minus_inf_prior(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]])
        y = ["H", "H", "N", "N"]
        model = train(X, y, nb_cfg(), classes=("H", "N", "Z"))
        assert model.class_log_prior[2] == -np.inf
        # The unseen class still has a proper uniform feature distribution.
        np.testing.assert_allclose(np.exp(model.feature_log_prob[2]).sum(), 1.0, atol=1e-12)
        assert set(predict(model, X)) <= {"H", "N"}


class TestLinearModels:
    def test_lr_separates_two_points(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        y = ["A", "B"]
        model = train(X, y, TrainConfig(method=Method.LR))
        assert predict(model, X) == ["A", "B"]
        scores = predict_scores(model, X)
        assert scores[0, 0] > 0.5
        assert scores[1, 1] > 0.5

    def test_svm_separates_two_clusters(self):
        rng = np.random.default_rng(3)
        a = rng.normal(0.0, 0.05, (10, 2))
        b = rng.normal(1.0, 0.05, (10, 2)) + np.array([0.0, 1.0])
        X = np.vstack([a, b])
        y = ["A"] * 10 + ["B"] * 10
        model = train(X, y, TrainConfig(method=Method.SVM))
        assert predict(model, X) == y

    def test_one_vs_rest_shapes(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(0, 1, (9, 3))
        y = ["A", "B", "C"] * 3
        for method in (Method.LR, Method.SVM):
            model = train(X, y, TrainConfig(method=method))
            assert model.weights.shape == (3, 3)
            assert model.bias.shape == (3,)
            assert np.isfinite(model.weights).all()

    def test_logistic_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(15)
        X = rng.normal(0, 1, (12, 4))
        t = np.where(rng.uniform(size=12) < 0.5, 1.0, -1.0)
        lam = 1e-3
        step = 1e-5
        for _ in range(20):
            w = rng.normal(0, 1, 4)
            b = float(rng.normal())
            gw, gb = logistic_gradient(w, b, X, t, lam)
            num_w = np.zeros(4)
            for j in range(4):
                delta = np.zeros(4)
                delta[j] = step
                num_w[j] = (
                    logistic_objective(w + delta, b, X, t, lam)
                    - logistic_objective(w - delta, b, X, t, lam)
                ) / (2 * step)
            num_b = (
                logistic_objective(w, b + step, X, t, lam)
                - logistic_objective(w, b - step, X, t, lam)
            ) / (2 * step)
            np.testing.assert_allclose(gw, num_w, rtol=1e-5, atol=1e-8)
            assert gb == pytest.approx(num_b, rel=1e-5, abs=1e-8)

    def test_hinge_gradient_matches_away_from_kink(self):
        rng = np.random.default_rng(25)
        X = rng.normal(0, 1, (10, 3))
        t = np.where(rng.uniform(size=10) < 0.5, 1.0, -1.0)
        lam = 1e-3
        step = 1e-5
        checked = 0
        while checked < 20:
            w = rng.normal(0, 1, 3)
            b = float(rng.normal())
            margins = t * (X @ w + b)
            if np.any(np.abs(1.0 - margins) < 1e-3):
                continue
            gw, gb = hinge_gradient(w, b, X, t, lam)
            num_w = np.zeros(3)
            for j in range(3):
                delta = np.zeros(3)
                delta[j] = step
                num_w[j] = (
                    hinge_objective(w + delta, b, X, t, lam)
                    - hinge_objective(w - delta, b, X, t, lam)
                ) / (2 * step)
            num_b = (
                hinge_objective(w, b + step, X, t, lam)
                - hinge_objective(w, b - step, X, t, lam)
            ) / (2 * step)
            np.testing.assert_allclose(gw, num_w, rtol=1e-5, atol=1e-8)
            assert gb == pytest.approx(num_b, rel=1e-5, abs=1e-8)
            checked += 1

    def test_bias_not_regularized(self):
        # With all-positive targets the objective is minimized by pushing
        # the bias up; an unregularized bias keeps growing while an L2
        # penalty on it would stall earlier.  Check the gradient directly.
        w = np.zeros(2)
        X = np.ones((4, 2))
        t = np.ones(4)
        _, gb = logistic_gradient(w, 10.0, X, t, 1000.0)
        # Gradient of the data term only: no lambda contribution.
        expected = float(np.mean(-t / (1 + np.exp(t * 10.0))))
        assert gb == pytest.approx(expected, rel=1e-12)

    def test_svm_raw_margins_lr_sigmoid_range(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        y = ["A", "B", "A", "B"]
        lr_scores = predict_scores(train(X, y, TrainConfig(method=Method.LR)), X)
        assert np.all((lr_scores >= 0) & (lr_scores <= 1))
        svm_scores = predict_scores(train(X, y, TrainConfig(method=Method.SVM)), X)
        assert svm_scores.min() < 0 or svm_scores.max() > 1  # margins, not probabilities


class TestRandomForest:
    def test_single_tree_memorizes_consistent_data(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(0, 1, (40, 6))
        y = ["A" if x[0] + x[3] > 1.0 else "B" for x in X]
        cfg = TrainConfig(method=Method.RF, rf_trees=1, rf_bootstrap=False, seed=1)
        model = train(X, y, cfg)
        assert predict(model, X) == y

    def test_xor_needs_depth_two(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = ["A", "B", "B", "A"]
        cfg = TrainConfig(
            method=Method.RF, rf_trees=5, rf_max_depth=2, rf_bootstrap=False, seed=3
        )
        model = train(X, y, cfg)
        assert predict(model, X) == y

    def test_max_depth_zero_is_a_stump_forest(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = ["A", "A", "B", "B"]
        cfg = TrainConfig(method=Method.RF, rf_trees=3, rf_max_depth=0, seed=1)
        model = train(X, y, cfg)
        for tree in model.trees:
            assert tree.feature.size == 1
            assert tree.feature[0] == -1

    def test_leaf_histograms_sum_to_sample_counts(self):
        rng = np.random.default_rng(31)
        X = rng.uniform(0, 1, (30, 4))
        y = ["A" if x[1] > 0.5 else "B" for x in X]
        cfg = TrainConfig(method=Method.RF, rf_trees=4, seed=7)
        model = train(X, y, cfg)
        for tree in model.trees:
            # Root histogram counts the full bootstrap sample; children
            # partition their parent exactly.
            assert tree.histogram[0].sum() == 30
            for node in range(tree.feature.size):
                if tree.feature[node] >= 0:
                    left, right = tree.left[node], tree.right[node]
                    np.testing.assert_array_equal(
                        tree.histogram[left] + tree.histogram[right],
                        tree.histogram[node],
                    )
                    assert tree.histogram[left].sum() >= 1
                    assert tree.histogram[right].sum() >= 1

    def test_bootstrap_indices_deterministic(self):
        a = bootstrap_indices(42, 3, 100)
        b = bootstrap_indices(42, 3, 100)
        np.testing.assert_array_equal(a, b)
        c = bootstrap_indices(42, 4, 100)
        assert not np.array_equal(a, c)

    def test_out_of_bag_fraction(self):
        # E[OOB fraction] = (1 - 1/n)^n -> 1/e; demand 30..45% for n >= 50
        # averaged over 20 trees.
        for n in (50, 120, 400):
            fractions = []
            for tree_index in range(20):
                rows = bootstrap_indices(1234, tree_index, n)
                oob = n - np.unique(rows).size
                fractions.append(oob / n)
            mean = float(np.mean(fractions))
            assert 0.30 <= mean <= 0.45

    def test_vote_fractions(self):
        rng = np.random.default_rng(13)
        X = rng.uniform(0, 1, (25, 3))
        y = ["A" if x[0] > 0.5 else "B" for x in X]
        cfg = TrainConfig(method=Method.RF, rf_trees=10, seed=5)
        model = train(X, y, cfg)
        scores = predict_scores(model, X)
        np.testing.assert_allclose(scores.sum(axis=1), 1.0, atol=1e-12)
        votes = scores * 10
        np.testing.assert_allclose(votes, np.round(votes), atol=1e-9)

    def test_forest_training_deterministic(self):
        rng = np.random.default_rng(21)
        X = rng.uniform(0, 1, (30, 5))
        y = ["A" if x[2] > 0.4 else "B" for x in X]
        cfg = TrainConfig(method=Method.RF, rf_trees=6, seed=17)
        m1 = train(X, y, cfg)
        m2 = train(X, y, cfg)
        for t1, t2 in zip(m1.trees, m2.trees):
            np.testing.assert_array_equal(t1.feature, t2.feature)
            np.testing.assert_array_equal(t1.threshold, t2.threshold)
            np.testing.assert_array_equal(t1.histogram, t2.histogram)


class TestSharedInterface:
    def make_data(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(0, 1, (12, 4))
        y = ["A" if x[0] > 0.5 else "B" for x in X]
        return X, y

    @pytest.mark.parametrize("method", list(Method))
    def test_empty_input_empty_output(self, method):
        X, y = self.make_data()
        model = train(X, y, TrainConfig(method=method))
        assert predict(model, np.zeros((0, 4))) == []

    @pytest.mark.parametrize("method", list(Method))
    def test_shape_mismatch(self, method):
        X, y = self.make_data()
        model = train(X, y, TrainConfig(method=method))
        with pytest.raises(ShapeMismatch):
            predict(model, np.zeros((2, 7)))

    @pytest.mark.parametrize("method", list(Method))
    def test_single_class_constant_model(self, method):
        X = np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]])
        y = ["N", "N", "N"]
        with pytest.warns(SingleClassWarning):
            model = train(X, y, TrainConfig(method=method))
        assert predict(model, X) == ["N", "N", "N"]

    def test_non_finite_rejected(self):
        X = np.array([[1.0, np.nan], [0.0, 1.0]])
        with pytest.raises(NonFiniteFeature):
            train(X, ["A", "B"], TrainConfig(method=Method.LR))

    def test_too_few_samples(self):
        with pytest.raises(DataError):
            train(np.array([[1.0]]), ["A"], TrainConfig(method=Method.NB))

    def test_label_row_count_mismatch(self):
        with pytest.raises(ShapeMismatch):
            train(np.zeros((3, 2)), ["A", "B"], TrainConfig(method=Method.NB))

    def test_classes_fix_score_column_order(self):
        X, y = self.make_data()
        model = train(X, y, TrainConfig(method=Method.NB), classes=("B", "A"))
        assert model.classes == ("B", "A")
        swapped = train(X, y, TrainConfig(method=Method.NB), classes=("A", "B"))
        s1 = predict_scores(model, X)
        s2 = predict_scores(swapped, X)
        np.testing.assert_allclose(s1[:, ::-1], s2, atol=1e-12)
        assert predict(model, X) == predict(swapped, X)

    def test_tie_break_lowest_class_index(self):
        # A symmetric forest vote: two classes tie 50/50, the first class
        # in scheme order must win.
        tree_a = DecisionTree(
            np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
            np.array([[1.0, 0.0]]),
        )
        tree_b = DecisionTree(
            np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
            np.array([[0.0, 1.0]]),
        )
        model = ForestModel(("H", "N"), (tree_a, tree_b), 2)
        scores = predict_scores(model, np.zeros((1, 2)))
        np.testing.assert_allclose(scores, [[0.5, 0.5]])
        assert predict(model, np.zeros((1, 2))) == ["H"]

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(method=Method.NB, nb_alpha=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(method=Method.LR, learning_rate=-1.0)
        with pytest.raises(ConfigError):
            TrainConfig(method=Method.RF, rf_trees=0)
