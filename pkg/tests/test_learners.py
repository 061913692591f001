import math

import numpy as np
import pytest

from microevents.learners import (
    LearnerError,
    QuasiSeparationError,
    fit_boosted,
    fit_forest,
    fit_logistic,
    permutation_importance,
    predict_proba,
    rank_features,
)
from microevents.stats import pr_auc_mean


def logit(p):
    return math.log(p / (1 - p))


def grouped_fixture():
    """P(y=1 | x=0) = 0.2 over 50 rows, P(y=1 | x=1) = 0.8 over 50 rows."""
    x = np.concatenate([np.zeros(50), np.ones(50)])[:, None]
    y = np.concatenate([np.repeat([0.0, 1.0], [40, 10]), np.repeat([0.0, 1.0], [10, 40])])
    return x, y


class TestFitLogistic:
    def test_grouped_data_matches_saturated_logits(self):
        x, y = grouped_fixture()
        model = fit_logistic(x, y)
        assert model.coef[0] == pytest.approx(logit(0.2), abs=1e-4)
        assert model.coef[1] == pytest.approx(logit(0.8) - logit(0.2), abs=1e-4)

    def test_intercept_only_is_logit_of_mean(self):
        y = np.array([0, 0, 0, 1, 1, 1, 1, 1, 1, 1], dtype=float)
        model = fit_logistic(np.empty((10, 0)), y)
        assert model.coef[0] == pytest.approx(logit(0.7), abs=1e-8)

    def test_separable_data_raises_quasi_separation(self):
        x = np.linspace(-2, 2, 40)[:, None]
        y = (x[:, 0] > 0).astype(float)
        with pytest.raises(QuasiSeparationError):
            fit_logistic(x, y)

    def test_log_likelihood_non_decreasing(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(200, 3))
        y = (rng.random(200) < 1 / (1 + np.exp(-(x @ [0.5, -1.0, 0.2])))).astype(float)
        model = fit_logistic(x, y)
        diffs = np.diff(model.ll_path)
        assert np.all(diffs >= -1e-9)

    def test_single_class_errors(self):
        with pytest.raises(LearnerError):
            fit_logistic(np.ones((5, 1)), np.ones(5))

    def test_rescaling_invariance(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(150, 2))
        y = (rng.random(150) < 1 / (1 + np.exp(-(0.8 * x[:, 0] - 0.3)))).astype(float)
        base = fit_logistic(x, y)
        scaled = x.copy()
        scaled[:, 0] *= 2.0
        refit = fit_logistic(scaled, y)
        assert refit.coef[1] == pytest.approx(base.coef[1] / 2.0, abs=1e-6)
        assert predict_proba(refit, scaled) == pytest.approx(predict_proba(base, x), abs=1e-6)

    def test_std_errors_against_information_matrix(self):
        x, y = grouped_fixture()
        model = fit_logistic(x, y)
        # independent oracle: inverse Fisher information at the MLE
        design = np.column_stack([np.ones(100), x])
        p = 1 / (1 + np.exp(-design @ model.coef))
        info = design.T @ (design * (p * (1 - p))[:, None])
        oracle_se = np.sqrt(np.diag(np.linalg.inv(info)))
        assert model.std_errors == pytest.approx(oracle_se, abs=1e-8)


class TestPredictProba:
    def test_zero_coefficients_give_half(self):
        x, y = grouped_fixture()
        model = fit_logistic(x, y)
        model.coef[:] = 0.0
        assert predict_proba(model, x) == pytest.approx(np.full(100, 0.5))

    def test_schema_mismatch_errors(self):
        x, y = grouped_fixture()
        model = fit_logistic(x, y)
        with pytest.raises(LearnerError, match="schema"):
            predict_proba(model, np.ones((3, 2)))

    def test_boosted_zero_trees_is_base_score(self):
        y = np.array([0, 0, 0, 1.0])
        model = fit_boosted(np.zeros((4, 1)), y, n_trees=0)
        expected = 1 / (1 + math.exp(-model.base_score))
        assert predict_proba(model, np.zeros((2, 1))) == pytest.approx([expected] * 2)
        assert expected == pytest.approx(0.25)


class TestForest:
    def _stump_data(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(size=(120, 1))
        y = (x[:, 0] > 0.5).astype(float)
        return x, y

    def test_separable_stump_perfect_train_accuracy(self):
        x, y = self._stump_data()
        model = fit_forest(x, y, n_trees=10, max_depth=1, seed=0)
        pred = (predict_proba(model, x) >= 0.5).astype(float)
        assert np.array_equal(pred, y)

    def test_single_depth0_tree_predicts_majority(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(100, 2))
        y = np.repeat([0.0, 1.0], [80, 20])
        model = fit_forest(x, y, n_trees=1, max_depth=0, seed=3)
        probs = predict_proba(model, x)
        assert len(np.unique(probs)) == 1
        assert probs[0] < 0.5  # majority class is 0

    def test_importances_normalized(self):
        x, y = self._stump_data()
        model = fit_forest(x, y, n_trees=5, max_depth=2, seed=1)
        assert model.feature_importances.sum() == pytest.approx(1.0, abs=1e-9)

    def test_fixed_seed_reproducible(self):
        x, y = self._stump_data()
        a = fit_forest(x, y, n_trees=8, max_depth=3, seed=9)
        b = fit_forest(x, y, n_trees=8, max_depth=3, seed=9)
        grid = np.random.default_rng(0).uniform(size=(50, 1))
        assert np.array_equal(predict_proba(a, grid), predict_proba(b, grid))

    def test_adding_trees_bounded_prediction_shift(self):
        x, y = self._stump_data()
        rng_grid = np.random.default_rng(1).uniform(size=(40, 1))
        prev = predict_proba(fit_forest(x, y, n_trees=1, max_depth=2, seed=7), rng_grid)
        for n in range(2, 12):
            cur = predict_proba(fit_forest(x, y, n_trees=n, max_depth=2, seed=7), rng_grid)
            # same seed stream grows the same prefix of trees
            assert np.max(np.abs(cur - prev)) <= 1.0 / n + 1e-12
            prev = cur

    def test_subsample_balanced_equal_class_draws(self):
        x = np.vstack([np.zeros((90, 1)), np.ones((10, 1))])
        y = np.repeat([0.0, 1.0], [90, 10])
        model = fit_forest(x, y, n_trees=30, max_depth=1, class_weighting="subsample_balanced", seed=2)
        # balanced subsampling pushes the minority-leaf fraction toward 0.5
        probs = predict_proba(model, np.array([[1.0]]))
        assert probs[0] > 0.9

    def test_unknown_weighting_errors(self):
        x, y = self._stump_data()
        with pytest.raises(LearnerError):
            fit_forest(x, y, class_weighting="bogus")


class TestBoosted:
    def test_single_stump_reproduces_newton_step(self):
        # oracle: leaf value = sum(y - p0) / sum(p0 (1 - p0)) on each side
        x = np.array([[0.0]] * 6 + [[1.0]] * 6)
        y = np.array([0, 0, 0, 0, 0, 1, 0, 1, 1, 1, 1, 1], dtype=float)
        model = fit_boosted(x, y, n_trees=1, depth=1, learning_rate=1.0, l2_lambda=0.0)
        p0 = y.mean()
        h = p0 * (1 - p0)
        left_oracle = np.sum(y[:6] - p0) / (6 * h)
        right_oracle = np.sum(y[6:] - p0) / (6 * h)
        tree = model.trees[0]
        leaf_values = sorted(v for f, v in zip(tree.feature, tree.value) if f < 0)
        assert leaf_values == pytest.approx(sorted([left_oracle, right_oracle]), abs=1e-10)

    def test_huge_l2_shrinks_leaves_to_base_score(self):
        x = np.array([[0.0]] * 5 + [[1.0]] * 5)
        y = np.array([0, 0, 0, 0, 1, 0, 1, 1, 1, 1], dtype=float)
        model = fit_boosted(x, y, n_trees=3, depth=1, learning_rate=0.5, l2_lambda=1e12)
        base_prob = 1 / (1 + math.exp(-model.base_score))
        assert predict_proba(model, x) == pytest.approx(np.full(10, base_prob), abs=1e-9)

    def test_learning_rate_must_be_positive(self):
        with pytest.raises(LearnerError):
            fit_boosted(np.zeros((4, 1)), np.array([0, 1, 0, 1.0]), learning_rate=0.0)

    def test_training_loss_non_increasing(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(150, 4))
        y = (rng.random(150) < 1 / (1 + np.exp(-(x @ [1.0, -0.5, 0.0, 0.3])))).astype(float)
        model = fit_boosted(x, y, n_trees=40, depth=2, learning_rate=0.3, l2_lambda=1.0, seed=0)
        assert np.all(np.diff(model.train_losses) <= 1e-9)

    def test_preserve_input_order_is_deterministic(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(60, 2))
        y = (x[:, 0] + rng.normal(scale=2.0, size=60) > 0).astype(float)
        a = fit_boosted(x, y, n_trees=10, depth=2, subsample=0.5, preserve_input_order=True, seed=1)
        b = fit_boosted(x, y, n_trees=10, depth=2, subsample=0.5, preserve_input_order=True, seed=99)
        assert np.array_equal(predict_proba(a, x), predict_proba(b, x))


class TestRankings:
    def test_logistic_rank_by_abs_coefficient(self):
        x, y = grouped_fixture()
        x2 = np.column_stack([np.random.default_rng(0).normal(size=100), x[:, 0]])
        model = fit_logistic(x2, y)
        assert abs(model.coef[1]) < abs(model.coef[2])
        assert rank_features(model) == [0, 1]

    def test_forest_rank_puts_split_feature_last(self):
        rng = np.random.default_rng(4)
        x = np.column_stack([rng.normal(size=120), rng.uniform(size=120)])
        y = (x[:, 1] > 0.5).astype(float)
        model = fit_forest(x, y, n_trees=10, max_depth=2, seed=0)
        assert rank_features(model)[-1] == 1

    def test_all_zero_importances_rank_by_column_order(self):
        x = np.zeros((20, 3))
        y = np.array([0, 1] * 10, dtype=float)
        model = fit_forest(x, y, n_trees=3, max_depth=2, seed=0)
        assert rank_features(model) == [0, 1, 2]


class TestPermutationImportance:
    def _model_and_data(self):
        rng = np.random.default_rng(12)
        x = np.column_stack([rng.uniform(size=160), rng.normal(size=160)])
        y = (x[:, 0] > 0.5).astype(float)
        model = fit_forest(x, y, n_trees=20, max_depth=2, seed=0)
        return model, x, y

    def test_unused_feature_near_zero_drop(self):
        model, x, y = self._model_and_data()
        drops = permutation_importance(model, x, y, pr_auc_mean, n_repeats=20, seed=0)
        assert abs(drops[1]) <= 0.02

    def test_sole_predictive_feature_has_largest_drop(self):
        model, x, y = self._model_and_data()
        drops = permutation_importance(model, x, y, pr_auc_mean, n_repeats=10, seed=0)
        assert drops[0] == max(drops)
        assert drops[0] > 0.2

    def test_identity_shuffler_gives_exact_zero(self):
        model, x, y = self._model_and_data()
        drops = permutation_importance(
            model, x, y, pr_auc_mean, n_repeats=3, seed=0, shuffler=lambda n, rng: np.arange(n)
        )
        assert np.array_equal(drops, np.zeros(2))
