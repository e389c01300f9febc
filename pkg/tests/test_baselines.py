import math

import numpy as np
import pytest

from gpagg import (
    Dataset,
    ExpertPredictions,
    Hyperparameters,
    NumericalError,
    Partitioning,
    bcm,
    collect_predictions,
    compute_weights,
    gpoe,
    grbcm_aggregate,
    kmeans_partition,
    poe,
    poe_family_aggregate,
    predict,
    rbcm,
    train_expert,
)
from gpagg.baselines import Weights


def make_preds(means, variances, prior=None):
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if prior is None:
        prior = np.full(means.shape[0], 2.0)
    return ExpertPredictions(means, variances, prior)


class TestWeights:
    def test_uniform_inv_m(self):
        preds = make_preds(np.zeros((3, 4)), np.ones((3, 4)))
        w = compute_weights(preds, "uniform_inv_M")
        assert np.all(w.beta == 0.25)

    def test_uniform_one(self):
        preds = make_preds(np.zeros((2, 3)), np.ones((2, 3)))
        assert np.all(compute_weights(preds, "uniform_one").beta == 1.0)

    def test_entropy_zero_when_posterior_equals_prior(self):
        prior = np.full(5, 1.7)
        preds = make_preds(np.zeros((5, 2)), np.full((5, 2), 1.7), prior)
        assert np.allclose(compute_weights(preds, "diff_entropy").beta, 0.0)

    def test_entropy_half_at_log_ratio_one(self):
        prior = np.full(4, math.e * 0.9)
        preds = make_preds(np.zeros((4, 3)), np.full((4, 3), 0.9), prior)
        assert np.allclose(compute_weights(preds, "diff_entropy").beta, 0.5)

    def test_unknown_scheme_raises(self):
        preds = make_preds(np.zeros((2, 2)), np.ones((2, 2)))
        with pytest.raises(ValueError):
            compute_weights(preds, "softmax")

    def test_variances_must_be_positive(self):
        with pytest.raises(ValueError):
            make_preds(np.zeros((2, 2)), np.array([[1.0, 0.0], [1.0, 1.0]]))


class TestPoeFamily:
    def test_two_expert_product_closed_form(self):
        preds = make_preds([[1.0, 3.0]], [[1.0, 1.0]])
        mean, var = poe(preds)
        assert mean[0] == pytest.approx(2.0, abs=1e-14)
        assert var[0] == pytest.approx(0.5, abs=1e-14)

    def test_single_expert_recovered_exactly(self):
        preds = make_preds([[1.3], [-0.4]], [[0.7], [0.9]])
        w = Weights(np.ones((2, 1)), "uniform_one")
        for flag in (False, True):
            mean, var = poe_family_aggregate(preds, w, flag)
            # exact up to one float rounding from the 1/(1/x) round trip
            assert np.allclose(mean, preds.means[:, 0], rtol=1e-15, atol=0)
            assert np.allclose(var, preds.variances[:, 0], rtol=1e-15, atol=0)

    def test_identical_experts_gpoe_inv_m_recovers_expert(self):
        col_m = np.array([0.5, -1.0, 2.0])
        col_v = np.array([0.3, 0.8, 1.1])
        preds = make_preds(np.tile(col_m[:, None], 5), np.tile(col_v[:, None], 5))
        mean, var = gpoe(preds)
        assert np.allclose(mean, col_m, atol=1e-14)
        assert np.allclose(var, col_v, atol=1e-14)

    def test_poe_precision_grows_with_expert_count(self):
        prev = np.inf
        for M in (1, 2, 4, 8):
            preds = make_preds(np.zeros((1, M)), np.full((1, M), 0.5))
            _, var = poe(preds)
            assert var[0] < prev
            prev = var[0]

    def test_rbcm_with_unit_weights_equals_bcm_bitwise(self):
        rng = np.random.default_rng(0)
        preds = make_preds(rng.standard_normal((6, 4)), rng.uniform(0.2, 1.5, (6, 4)))
        m1, v1 = rbcm(preds, scheme="uniform_one")
        m2, v2 = bcm(preds)
        assert np.array_equal(m1, m2)
        assert np.array_equal(v1, v2)

    def test_gpoe_convex_weights_variance_bound(self):
        rng = np.random.default_rng(1)
        preds = make_preds(rng.standard_normal((8, 5)), rng.uniform(0.1, 2.0, (8, 5)))
        _, var = gpoe(preds)  # betas sum to one per point
        assert np.all(var >= preds.variances.min(axis=1) - 1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        means = rng.standard_normal((7, 5))
        variances = rng.uniform(0.2, 1.4, (7, 5))
        prior = np.full(7, 2.0)
        perm = rng.permutation(5)
        for fn in (poe, gpoe, bcm, rbcm):
            a = fn(ExpertPredictions(means, variances, prior))
            b = fn(ExpertPredictions(means[:, perm], variances[:, perm], prior))
            assert np.allclose(a[0], b[0], atol=1e-12)
            assert np.allclose(a[1], b[1], atol=1e-12)

    def test_non_positive_precision_names_test_index(self):
        # large weights on weak experts push the corrected precision negative
        preds = make_preds([[0.0, 0.0]], [[1e6, 1e6]], prior=np.array([1.0]))
        w = Weights(np.full((1, 2), 2.5), "uniform_one")
        with pytest.raises(NumericalError, match="test index 0"):
            poe_family_aggregate(preds, w, True)

    def test_weight_shape_mismatch_raises(self):
        preds = make_preds(np.zeros((2, 2)), np.ones((2, 2)))
        with pytest.raises(Exception):
            poe_family_aggregate(preds, Weights(np.ones((3, 2)), "uniform_one"), False)


class TestCollectPredictions:
    def test_columns_match_individual_experts(self):
        rng = np.random.default_rng(3)
        hp = Hyperparameters([0.5], 1.0, 0.1)
        parts = [
            Dataset(rng.uniform(0, 1, (6, 1)), rng.standard_normal(6)) for _ in range(3)
        ]
        experts = [train_expert(p, hp) for p in parts]
        X_star = rng.uniform(0, 1, (4, 1))
        preds = collect_predictions(experts, X_star, hp)
        for i, e in enumerate(experts):
            m, v = predict(e, X_star, hp)
            assert np.array_equal(preds.means[:, i], m)
            assert np.array_equal(preds.variances[:, i], v)
        assert np.allclose(preds.prior_variance, 1.1)


class TestGrbcm:
    @staticmethod
    def _setup(M, n_per=8, seed=4):
        rng = np.random.default_rng(seed)
        hp = Hyperparameters([0.4], 1.0, 0.05)
        data = Dataset(rng.uniform(0, 1, (M * n_per, 1)), rng.standard_normal(M * n_per))
        parts = kmeans_partition(data, M, seed=seed)
        X_star = rng.uniform(0, 1, (5, 1))
        return hp, data, parts, X_star

    def test_two_partitions_equal_full_gp(self):
        hp, data, parts, X_star = self._setup(2)
        mean, _ = grbcm_aggregate(parts, hp, X_star, seed=0)
        full_mean, _ = predict(train_expert(data, hp), X_star, hp)
        assert np.allclose(mean, full_mean, atol=1e-8)

    def test_identical_partitions_recover_augmented_expert(self):
        # all augmented experts coincide; the aggregate can deviate from them
        # only through the base-correction term, which is bounded by the
        # base-vs-augmented prediction gap (and vanishes as noise -> 0)
        rng = np.random.default_rng(5)
        hp = Hyperparameters([0.5], 1.0, 1e-6)
        base = Dataset(np.linspace(0, 1, 6)[:, None], rng.standard_normal(6))
        parts = Partitioning(
            assignments=np.repeat(np.arange(3), 6),
            subsets=[base, base, base],
            method="random",
        )
        X_star = rng.uniform(0, 1, (4, 1))
        mean, _ = grbcm_aggregate(parts, hp, X_star, seed=0)
        merged = Dataset(np.vstack([base.X, base.X]), np.concatenate([base.y, base.y]))
        aug_mean, _ = predict(train_expert(merged, hp), X_star, hp)
        base_mean, _ = predict(train_expert(base, hp), X_star, hp)
        gap = np.max(np.abs(aug_mean - base_mean))
        assert np.max(np.abs(mean - aug_mean)) <= gap + 1e-12
        assert np.allclose(mean, aug_mean, atol=2e-3)

    def test_matches_pointwise_formula_transcription(self):
        hp, data, parts, X_star = self._setup(3)
        mean, var = grbcm_aggregate(parts, hp, X_star, seed=7)

        # transcription oracle: scalar arithmetic per test point
        base_idx = int(np.random.default_rng(7).integers(3))
        base = parts.subsets[base_idx]
        mu_b, var_b = predict(train_expert(base, hp), X_star, hp)
        others = [s for i, s in enumerate(parts.subsets) if i != base_idx]
        preds = []
        for s in others:
            merged = Dataset(np.vstack([base.X, s.X]), np.concatenate([base.y, s.y]))
            preds.append(predict(train_expert(merged, hp), X_star, hp))
        for t in range(X_star.shape[0]):
            betas = [1.0]
            for k in range(1, len(others)):
                betas.append(0.5 * (math.log(var_b[t]) - math.log(preds[k][1][t])))
            prec = sum(b / p[1][t] for b, p in zip(betas, preds))
            prec += (1.0 - sum(betas)) / var_b[t]
            num = sum(b * p[0][t] / p[1][t] for b, p in zip(betas, preds))
            num += (1.0 - sum(betas)) * mu_b[t] / var_b[t]
            assert mean[t] == pytest.approx(num / prec, rel=1e-10)
            assert var[t] == pytest.approx(1.0 / prec, rel=1e-10)

    def test_single_partition_raises(self):
        hp, data, parts, X_star = self._setup(2)
        single = Partitioning(np.zeros(data.n, dtype=int), [data], "kmeans")
        with pytest.raises(ValueError):
            grbcm_aggregate(single, hp, X_star, seed=0)
