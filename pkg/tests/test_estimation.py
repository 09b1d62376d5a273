import numpy as np
import pytest

import densefield as df
from densefield.field import CovariancePack

from oracles import brute_force_mmse


@pytest.fixture(scope="module")
def exp_model():
    return df.make_correlation("exp-markov")


@pytest.fixture(scope="module")
def sinc_model():
    return df.make_correlation("sinc")


def diagonal_pack(n):
    return CovariancePack.from_matrix(np.eye(n))


class TestMmseEstimate:
    def test_noiseless_channel_returns_observation(self, exp_model):
        cov = df.covariance_matrix(exp_model, df.sensor_positions(4))
        ch = df.TestChannel(p=0.0, cov=cov)
        u = np.array([0.3, -1.2, 0.7, 2.0])
        assert np.allclose(df.mmse_estimate(ch, u), u, atol=1e-12)

    def test_noiseless_with_clamped_spectrum_is_conditioning_error(self, sinc_model):
        cov = df.covariance_matrix(sinc_model, df.sensor_positions(64))
        assert cov.n_clamped > 0
        with pytest.raises(df.ConditioningError):
            df.mmse_estimate(df.TestChannel(p=0.0, cov=cov), np.zeros(64))

    def test_white_source_halves_observation(self):
        ch = df.TestChannel(p=1.0, cov=diagonal_pack(4))
        u = np.array([2.0, -4.0, 0.5, 1.0])
        assert np.allclose(df.mmse_estimate(ch, u), u / 2, atol=1e-14)

    def test_zero_observation_maps_to_zero(self, exp_model):
        cov = df.covariance_matrix(exp_model, df.sensor_positions(5))
        got = df.mmse_estimate(df.TestChannel(p=0.7, cov=cov), np.zeros(5))
        assert np.all(got == 0.0)

    def test_linear_in_observation(self, exp_model):
        cov = df.covariance_matrix(exp_model, df.sensor_positions(6))
        ch = df.TestChannel(p=0.4, cov=cov)
        rng = np.random.default_rng(3)
        u, v = rng.standard_normal(6), rng.standard_normal(6)
        lhs = df.mmse_estimate(ch, 2.0 * u - 3.0 * v)
        rhs = 2.0 * df.mmse_estimate(ch, u) - 3.0 * df.mmse_estimate(ch, v)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_batch_shape(self, exp_model):
        cov = df.covariance_matrix(exp_model, df.sensor_positions(3))
        ch = df.TestChannel(p=0.5, cov=cov)
        batch = np.random.default_rng(0).standard_normal((10, 3))
        out = df.mmse_estimate(ch, batch)
        assert out.shape == (10, 3)
        assert np.allclose(out[2], df.mmse_estimate(ch, batch[2]), atol=1e-14)

    def test_negative_noise_rejected(self, exp_model):
        cov = df.covariance_matrix(exp_model, df.sensor_positions(2))
        with pytest.raises(ValueError):
            df.TestChannel(p=-1.0, cov=cov)


class TestMmseError:
    def test_perfect_observation(self, exp_model):
        cov = df.covariance_matrix(exp_model, df.sensor_positions(4))
        res = df.mmse_error(df.TestChannel(p=0.0, cov=cov))
        assert res.avg_mse <= 1e-8

    def test_white_source_closed_form(self):
        res = df.mmse_error(df.TestChannel(p=3.0, cov=diagonal_pack(5)))
        assert np.allclose(res.per_sample_mse, 0.75, atol=1e-14)

    def test_exp_two_sensor_frozen_oracle_value(self, exp_model):
        # brute-force normal equations on the 2x2 with off-diagonal e^-0.5
        cov = df.covariance_matrix(exp_model, df.sensor_positions(2))
        res = df.mmse_error(df.TestChannel(p=1.0, cov=cov))
        assert res.avg_mse == pytest.approx(0.4493574848063286, abs=1e-12)
        oracle = brute_force_mmse(cov.sigma_x, 1.0)
        assert np.allclose(res.per_sample_mse, oracle, atol=1e-12)

    def test_monotone_in_noise(self, exp_model, sinc_model):
        for model in (exp_model, sinc_model):
            cov = df.covariance_matrix(model, df.sensor_positions(24))
            values = [df.mmse_error(df.TestChannel(p=p, cov=cov)).avg_mse
                      for p in (0.01, 0.1, 0.5, 1.0, 5.0, 50.0)]
            diffs = np.diff(values)
            assert np.all(diffs >= -1e-12)

    def test_saturates_at_unit_variance(self, exp_model):
        cov = df.covariance_matrix(exp_model, df.sensor_positions(8))
        res = df.mmse_error(df.TestChannel(p=1e12, cov=cov))
        assert res.avg_mse <= 1.0 + 1e-9
        assert res.avg_mse > 0.999

    def test_entries_in_unit_interval_and_mean_consistent(self, sinc_model):
        cov = df.covariance_matrix(sinc_model, df.sensor_positions(32))
        res = df.mmse_error(df.TestChannel(p=0.8, cov=cov))
        assert np.all(res.per_sample_mse >= 0.0)
        assert np.all(res.per_sample_mse <= 1.0 + 1e-9)
        assert res.avg_mse == pytest.approx(res.per_sample_mse.mean(), abs=1e-15)

    def test_matches_brute_force_for_small_n(self, exp_model, sinc_model):
        rng = np.random.default_rng(17)
        for _ in range(12):
            model = exp_model if rng.integers(2) else sinc_model
            n = int(rng.integers(1, 7))
            p = float(10 ** rng.uniform(-2, 1))
            cov = df.covariance_matrix(model, df.sensor_positions(n))
            res = df.mmse_error(df.TestChannel(p=p, cov=cov))
            oracle = brute_force_mmse(cov.sigma_x, p)
            assert np.max(np.abs(res.per_sample_mse - oracle)) < 1e-10


class TestAveragingEstimatorBound:
    def test_zero_noise_large_window_limit(self, exp_model):
        theta = 0.3
        val = df.averaging_estimator_mse_bound(exp_model, 10 ** 9, theta, 0.0)
        assert val == pytest.approx(1 - np.exp(-2 * theta), rel=1e-6)

    def test_frozen_arithmetic_example(self, exp_model):
        # theta=0.2, N=100, p = N theta^2 = 4
        val = df.averaging_estimator_mse_bound(exp_model, 100, 0.2, 4.0)
        assert val == pytest.approx(0.4972599654732706, abs=1e-12)

    def test_bounds_optimal_estimator(self, exp_model, sinc_model):
        rng = np.random.default_rng(5)
        for _ in range(20):
            model = exp_model if rng.integers(2) else sinc_model
            n = int(rng.integers(8, 65))
            theta = float(rng.uniform(3.0 / n, model.theta_mono))
            if model(theta) <= 0:
                continue
            p = float(10 ** rng.uniform(-2, 1))
            cov = df.covariance_matrix(model, df.sensor_positions(n))
            res = df.mmse_error(df.TestChannel(p=p, cov=cov))
            bound = df.averaging_estimator_mse_bound(model, n, theta, p)
            assert bound >= np.max(res.per_sample_mse) - 1e-12

    def test_small_window_rejected(self, exp_model):
        with pytest.raises(ValueError):
            df.averaging_estimator_mse_bound(exp_model, 4, 0.25, 1.0)

    def test_theta_beyond_monotone_radius_rejected(self, exp_model):
        with pytest.raises(ValueError):
            df.averaging_estimator_mse_bound(exp_model, 100, 1.5, 1.0)
