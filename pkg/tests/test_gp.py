import json
import math

import numpy as np
import pytest

from gpagg import (
    Dataset,
    DimensionError,
    FitOptions,
    Hyperparameters,
    fit_shared_hyperparameters,
    kernel_eval,
    kernel_matrix,
    lml_gradient,
    log_marginal_likelihood,
    predict,
    train_expert,
)

LOG_2PI = math.log(2.0 * math.pi)


def dense_lml_oracle(data, hp):
    """Brute-force lml via explicit dense inverse and slogdet."""
    K = kernel_matrix(data.X, data.X, hp)
    C = K + hp.noise_variance * np.eye(data.n)
    quad = data.y @ np.linalg.inv(C) @ data.y
    _, logdet = np.linalg.slogdet(C)
    return -0.5 * quad - 0.5 * logdet - 0.5 * data.n * LOG_2PI


def fd_gradient_oracle(data, hp, step=1e-5):
    """Central finite differences of the lml in log-parameter space."""
    v0 = hp.log_vector()
    grad = np.empty(v0.size)
    for j in range(v0.size):
        vp, vm = v0.copy(), v0.copy()
        vp[j] += step
        vm[j] -= step
        fp = log_marginal_likelihood(data, Hyperparameters.from_log_vector(vp))
        fm = log_marginal_likelihood(data, Hyperparameters.from_log_vector(vm))
        grad[j] = (fp - fm) / (2 * step)
    return grad


def random_dataset(rng, n, d=1):
    return Dataset(rng.uniform(-1, 1, (n, d)), rng.standard_normal(n))


def random_hp(rng, d=1, ard=False):
    k = d if ard else 1
    return Hyperparameters(
        np.exp(rng.uniform(-1.0, 0.5, k)),
        math.exp(rng.uniform(-0.5, 0.5)),
        math.exp(rng.uniform(-3.0, -0.5)),
    )


class TestKernel:
    def test_zero_distance_gives_signal_variance(self):
        hp = Hyperparameters([0.7], 2.3, 0.1)
        x = np.array([0.4, -1.2])
        assert kernel_eval(x, x, hp) == pytest.approx(2.3, abs=0)

    def test_unit_distance_frozen_value(self):
        hp = Hyperparameters([1.0], 1.0, 0.1)
        assert kernel_eval([0.0], [1.0], hp) == pytest.approx(0.6065306597126334, abs=1e-12)

    def test_huge_lengthscale_approaches_signal_variance(self):
        hp = Hyperparameters([1e6], 1.5, 0.1)
        assert abs(kernel_eval([0.0], [3.0], hp) - 1.5) < 1e-6

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            hp = random_hp(rng, d=3)
            a, b = rng.standard_normal(3), rng.standard_normal(3)
            kab = kernel_eval(a, b, hp)
            assert kab == pytest.approx(kernel_eval(b, a, hp), rel=1e-15)
            assert 0.0 < kab <= hp.signal_variance

    def test_dimension_mismatch_raises(self):
        hp = Hyperparameters([1.0], 1.0, 0.1)
        with pytest.raises(DimensionError):
            kernel_eval([0.0, 1.0], [0.0], hp)
        with pytest.raises(DimensionError):
            kernel_matrix(np.zeros((3, 2)), np.zeros((3, 3)), hp)

    def test_ard_lengthscale_must_match_dimension(self):
        hp = Hyperparameters([1.0, 2.0, 3.0], 1.0, 0.1)
        with pytest.raises(DimensionError):
            kernel_matrix(np.zeros((3, 2)), np.zeros((3, 2)), hp)


class TestTypes:
    def test_hyperparameters_must_be_positive(self):
        for bad in [([0.0], 1.0, 1.0), ([1.0], -1.0, 1.0), ([1.0], 1.0, 0.0)]:
            with pytest.raises(ValueError):
                Hyperparameters(*bad)

    def test_hyperparameters_json_round_trip(self):
        hp = Hyperparameters([0.2, 0.4], 1.5, 0.04)
        again = Hyperparameters.from_json(hp.to_json())
        assert again == hp
        payload = json.loads(hp.to_json())
        assert set(payload) == {"lengthscale", "signal_variance", "noise_variance"}
        assert payload["lengthscale"] == [0.2, 0.4]

    def test_dataset_rejects_mismatch_and_nonfinite(self):
        with pytest.raises(DimensionError):
            Dataset(np.zeros((3, 1)), np.zeros(4))
        with pytest.raises(ValueError):
            Dataset(np.array([[np.nan]]), np.array([1.0]))
        with pytest.raises(ValueError):
            Dataset(np.array([[1.0]]), np.array([np.inf]))

    def test_dataset_accepts_1d_inputs(self):
        ds = Dataset(np.arange(4.0), np.arange(4.0))
        assert ds.X.shape == (4, 1)

    def test_trained_expert_factorization_invariants(self):
        rng = np.random.default_rng(1)
        data = random_dataset(rng, 12)
        hp = random_hp(rng)
        expert = train_expert(data, hp)
        C = kernel_matrix(data.X, data.X, hp) + hp.noise_variance * np.eye(data.n)
        recon = expert.chol_C @ expert.chol_C.T
        rel = np.linalg.norm(recon - C) / np.linalg.norm(C)
        assert rel < 1e-8
        assert np.linalg.norm(C @ expert.alpha - data.y) < 1e-8


class TestLogMarginalLikelihood:
    def test_single_point_zero_target_closed_form(self):
        hp = Hyperparameters([0.5], 1.3, 0.2)
        data = Dataset(np.array([[0.7]]), np.array([0.0]))
        expected = -0.5 * math.log(2 * math.pi * (1.3 + 0.2))
        assert log_marginal_likelihood(data, hp) == pytest.approx(expected, abs=1e-12)

    def test_matches_dense_inverse_oracle(self):
        rng = np.random.default_rng(2)
        data = random_dataset(rng, 3)
        hp = random_hp(rng)
        assert log_marginal_likelihood(data, hp) == pytest.approx(
            dense_lml_oracle(data, hp), abs=1e-10
        )

    def test_dense_oracle_agreement_up_to_n20(self):
        rng = np.random.default_rng(3)
        for n in [2, 5, 11, 20]:
            for _ in range(3):
                data = random_dataset(rng, n, d=2)
                hp = random_hp(rng, d=2)
                assert abs(log_marginal_likelihood(data, hp) - dense_lml_oracle(data, hp)) < 1e-8

    def test_zeroing_targets_increases_lml_iff_quadratic_positive(self):
        rng = np.random.default_rng(4)
        data = random_dataset(rng, 8)
        hp = random_hp(rng)
        zeroed = Dataset(data.X, np.zeros(data.n))
        assert log_marginal_likelihood(zeroed, hp) > log_marginal_likelihood(data, hp)


class TestGradient:
    def test_matches_finite_differences_on_50_draws(self):
        rng = np.random.default_rng(5)
        for i in range(50):
            d = 1 if i % 2 == 0 else 2
            data = random_dataset(rng, rng.integers(3, 9), d=d)
            hp = random_hp(rng, d=d, ard=(i % 4 == 3))
            grad = lml_gradient(data, hp)
            fd = fd_gradient_oracle(data, hp)
            denom = max(np.linalg.norm(fd), 1e-8)
            assert np.linalg.norm(grad - fd) / denom < 1e-5

    def test_single_point_noise_gradient_matches_fd(self):
        data = Dataset(np.array([[0.0]]), np.array([1.7]))
        hp = Hyperparameters([1.0], 0.8, 0.3)
        grad = lml_gradient(data, hp)
        fd = fd_gradient_oracle(data, hp)
        assert np.allclose(grad, fd, rtol=1e-6, atol=1e-9)

    def test_gradient_small_at_found_optimum(self):
        rng = np.random.default_rng(6)
        data = random_dataset(rng, 40)
        init = Hyperparameters([0.5], 1.0, 0.1)
        opts = FitOptions(restarts=1)
        hp = fit_shared_hyperparameters([data], init, opts)
        # L-BFGS-B stops on the projected-gradient norm
        assert np.max(np.abs(lml_gradient(data, hp))) < 1e-4


class TestFit:
    def test_init_at_optimum_is_a_fixed_point(self):
        rng = np.random.default_rng(7)
        data = random_dataset(rng, 30)
        rough = Hyperparameters([0.5], 1.0, 0.1)
        opts = FitOptions(restarts=2, seed=0)
        opt = fit_shared_hyperparameters([data], rough, opts)
        again = fit_shared_hyperparameters([data], opt, opts)
        f_opt = log_marginal_likelihood(data, opt)
        f_again = log_marginal_likelihood(data, again)
        assert f_again >= f_opt - 1e-9

    def test_objective_never_worse_than_init(self):
        rng = np.random.default_rng(8)
        parts = [random_dataset(rng, 15) for _ in range(3)]
        init = Hyperparameters([2.0], 0.5, 0.5)
        hp = fit_shared_hyperparameters(parts, init, FitOptions(restarts=2))
        before = sum(log_marginal_likelihood(p, init) for p in parts)
        after = sum(log_marginal_likelihood(p, hp) for p in parts)
        assert after >= before - 1e-9

    def test_recovers_known_generative_parameters(self):
        # data drawn from a known SE-GP; recovery within 0.5 in log space.
        # inputs span 40 lengthscales so the signal variance is identifiable
        rng = np.random.default_rng(9)
        truth = Hyperparameters([0.2], 1.0, 0.04)
        X = rng.uniform(0, 8, (500, 1))
        K = kernel_matrix(X, X, truth) + truth.noise_variance * np.eye(500)
        y = np.linalg.cholesky(K) @ rng.standard_normal(500)
        data = Dataset(X, y)
        init = Hyperparameters([0.5], 0.5, 0.1)
        hp = fit_shared_hyperparameters([data], init, FitOptions(restarts=1))
        assert np.max(np.abs(hp.log_vector() - truth.log_vector())) < 0.5

    def test_duplicated_partition_keeps_argmax(self):
        rng = np.random.default_rng(10)
        data = random_dataset(rng, 25)
        init = Hyperparameters([0.5], 1.0, 0.1)
        opts = FitOptions(restarts=2, seed=1)
        single = fit_shared_hyperparameters([data], init, opts)
        double = fit_shared_hyperparameters([data, data], init, opts)
        assert np.allclose(single.log_vector(), double.log_vector(), atol=1e-3)
        f1 = log_marginal_likelihood(data, single)
        f2 = sum(log_marginal_likelihood(p, double) for p in [data, data])
        assert f2 == pytest.approx(2 * log_marginal_likelihood(data, double), rel=1e-12)
        assert f2 <= 2 * f1 + 1e-9

    def test_empty_partition_list_raises(self):
        with pytest.raises(ValueError):
            fit_shared_hyperparameters([], Hyperparameters([1.0], 1.0, 0.1))

    def test_ard_flag_expands_lengthscale(self):
        rng = np.random.default_rng(11)
        data = random_dataset(rng, 20, d=2)
        init = Hyperparameters([0.5], 1.0, 0.1)
        hp = fit_shared_hyperparameters([data], init, FitOptions(restarts=1, ard=True))
        assert hp.lengthscale.size == 2


class TestPredict:
    def test_single_point_closed_form(self):
        hp = Hyperparameters([1.0], 2.0, 0.5)
        data = Dataset(np.array([[0.3]]), np.array([1.4]))
        expert = train_expert(data, hp)
        mean, var = predict(expert, np.array([[0.3]]), hp)
        assert mean[0] == pytest.approx(2.0 / 2.5 * 1.4, rel=1e-12)

    def test_near_noiseless_interpolation(self):
        hp = Hyperparameters([1.0], 1.0, 1e-12)
        data = Dataset(np.array([[0.5]]), np.array([2.0]))
        expert = train_expert(data, hp)
        mean, _ = predict(expert, np.array([[0.5]]), hp)
        assert abs(mean[0] - 2.0) < 1e-4

    def test_matches_dense_inverse_oracle(self):
        rng = np.random.default_rng(12)
        data = random_dataset(rng, 4)
        hp = random_hp(rng)
        expert = train_expert(data, hp)
        X_star = rng.uniform(-1, 1, (6, 1))
        mean, var = predict(expert, X_star, hp)
        C = kernel_matrix(data.X, data.X, hp) + hp.noise_variance * np.eye(4)
        k = kernel_matrix(data.X, X_star, hp)
        Cinv = np.linalg.inv(C)
        mean_o = k.T @ Cinv @ data.y
        var_o = hp.signal_variance + hp.noise_variance - np.sum(k * (Cinv @ k), axis=0)
        assert np.allclose(mean, mean_o, atol=1e-8)
        assert np.allclose(var, var_o, atol=1e-8)

    def test_variance_floor_and_growth_with_distance(self):
        hp = Hyperparameters([0.5], 1.0, 0.01)
        data = Dataset(np.array([[0.0]]), np.array([1.0]))
        expert = train_expert(data, hp)
        _, var = predict(expert, np.array([[0.0], [5.0]]), hp)
        assert np.all(var >= hp.noise_variance * (1 - 1e-10))
        assert var[0] <= var[1]

    def test_variance_floor_on_many_draws(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            data = random_dataset(rng, 15)
            hp = random_hp(rng)
            expert = train_expert(data, hp)
            _, var = predict(expert, rng.uniform(-2, 2, (20, 1)), hp)
            assert np.all(var >= hp.noise_variance - 1e-10)

    def test_hyperparameter_mismatch_raises(self):
        rng = np.random.default_rng(14)
        data = random_dataset(rng, 5)
        expert = train_expert(data, Hyperparameters([1.0], 1.0, 0.1))
        with pytest.raises(ValueError):
            predict(expert, np.zeros((2, 1)), Hyperparameters([2.0], 1.0, 0.1))

    def test_test_dimension_mismatch_raises(self):
        rng = np.random.default_rng(15)
        data = random_dataset(rng, 5, d=2)
        expert = train_expert(data, Hyperparameters([1.0], 1.0, 0.1))
        with pytest.raises(DimensionError):
            predict(expert, np.zeros((2, 3)))
