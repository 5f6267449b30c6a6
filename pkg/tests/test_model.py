import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otafl import model
from otafl.model import SystemConfig

from helpers import finite_difference_gradient, power_iteration_extremes, small_config


def _dataset(cfg, rng, reg=1e-3, noise_var=0.2):
    return model.generate_ridge_dataset(cfg, reg, rng, noise_var)


class TestSystemConfig:
    def test_json_roundtrip(self):
        cfg = small_config()
        again = SystemConfig.from_json(cfg.to_json())
        assert again == cfg

    def test_unknown_fields_rejected(self):
        doc = json.loads(small_config().to_json())
        doc["bogus"] = 1
        with pytest.raises(ValueError, match="unknown"):
            SystemConfig.from_json(json.dumps(doc))

    def test_snr_alternative(self):
        doc = json.loads(small_config().to_json())
        del doc["noise_var"]
        doc["snr_db"] = 15.0
        cfg = SystemConfig.from_json(json.dumps(doc))
        assert cfg.noise_var == pytest.approx(cfg.max_power / 10**1.5)

    def test_infinite_epsilon_roundtrip(self):
        cfg = small_config(epsilon=math.inf)
        again = SystemConfig.from_json(cfg.to_json())
        assert math.isinf(again.dp_epsilon[0])

    @pytest.mark.parametrize(
        "bad",
        [
            {"num_devices": 0},
            {"max_power": 0.0},
            {"dp_delta": (0.0, 0.5)},
            {"dp_delta": (1.0, 0.5)},
            {"strong_convexity": 2.0},  # mu > omega
            {"noise_var": -1.0},
        ],
    )
    def test_invariants_rejected(self, bad):
        with pytest.raises(ValueError):
            small_config().with_updates(**bad)


class TestChannel:
    def test_deterministic_given_seed(self):
        cfg = small_config(num_devices=1, num_antennas=1)
        a = model.generate_channel(cfg, np.random.default_rng(42))
        b = model.generate_channel(cfg, np.random.default_rng(42))
        assert a.shape == (1, 1)
        assert np.array_equal(a, b)

    def test_moments(self):
        cfg = small_config(num_devices=10, num_antennas=4)
        rng = np.random.default_rng(0)
        draws = np.stack([model.generate_channel(cfg, rng) for _ in range(100_000)])
        assert np.all(np.abs(draws.mean(axis=0)) < 0.02)
        second = (np.abs(draws) ** 2).mean(axis=0)
        assert np.all(second > 0.98) and np.all(second < 1.02)

    def test_shape_20_10(self):
        cfg = small_config(num_devices=10, num_antennas=20)
        h = model.generate_channel(cfg, np.random.default_rng(1))
        assert h.shape == (20, 10)


class TestDataset:
    def test_uniform_partition(self):
        cfg = small_config(num_devices=10, samples=100, model_dim=20)
        ds = _dataset(cfg, np.random.default_rng(0))
        assert len(ds.partition) == 10
        assert all(b - a == 100 for a, b in ds.partition)
        assert ds.inputs.shape == (1000, 20)

    def test_equal_partition_rejects_uneven(self):
        with pytest.raises(ValueError):
            model.equal_partition(1001, 10)

    def test_noiseless_limit(self):
        cfg = small_config(samples=50)
        ds = _dataset(cfg, np.random.default_rng(3), noise_var=0.0)
        assert np.allclose(ds.outputs, ds.inputs @ ds.w_true)

    def test_measurement_noise_variance(self):
        cfg = small_config(num_devices=1, samples=100_000, model_dim=5)
        ds = _dataset(cfg, np.random.default_rng(4))
        resid = ds.outputs - ds.inputs @ ds.w_true
        assert 0.19 < resid.var() < 0.21


class TestLoss:
    def test_loss_at_zero(self):
        cfg = small_config()
        ds = _dataset(cfg, np.random.default_rng(5))
        expected = float(ds.outputs @ ds.outputs) / (2 * ds.num_samples)
        assert model.loss(ds, np.zeros(cfg.model_dim)) == pytest.approx(expected)

    def test_loss_zero_outputs(self):
        cfg = small_config()
        ds = _dataset(cfg, np.random.default_rng(6), reg=0.3)
        ds = model.RidgeDataset(ds.inputs, np.zeros(ds.num_samples), ds.partition, 0.3, ds.w_true)
        w = np.random.default_rng(7).standard_normal(cfg.model_dim)
        expected = np.linalg.norm(ds.inputs @ w) ** 2 / (2 * ds.num_samples) + 0.15 * w @ w
        assert model.loss(ds, w) == pytest.approx(expected)

    def test_gradient_matches_finite_differences(self):
        cfg = small_config(samples=30, model_dim=4)
        ds = _dataset(cfg, np.random.default_rng(8))
        w = np.random.default_rng(9).standard_normal(4)
        fd = finite_difference_gradient(lambda x: model.loss(ds, x), w)
        grad = model.loss_gradient(ds, w)
        assert np.allclose(grad, fd, rtol=1e-6, atol=1e-8)


class TestExactMinimizer:
    def test_identity_inputs(self):
        # U = I with K = d reduces to w* = v / (1 + K phi)
        cfg = small_config(num_devices=1, samples=3, model_dim=3)
        v = np.array([1.0, -2.0, 0.5])
        ds = model.RidgeDataset(np.eye(3), v, ((0, 3),), 0.1, np.zeros(3))
        assert np.allclose(model.exact_minimizer(ds), v / (1 + 3 * 0.1))

    def test_small_reg_limit_is_least_squares(self):
        cfg = small_config(num_devices=1, samples=40, model_dim=3)
        ds = _dataset(cfg, np.random.default_rng(10), reg=1e-12)
        lsq = np.linalg.lstsq(ds.inputs, ds.outputs, rcond=None)[0]
        assert np.allclose(model.exact_minimizer(ds), lsq, atol=1e-6)

    def test_stationarity(self):
        cfg = small_config(num_devices=3, samples=50, model_dim=6)
        ds = _dataset(cfg, np.random.default_rng(11))
        w_star = model.exact_minimizer(ds)
        bound = 1e-9 * (1 + np.linalg.norm(ds.inputs.T @ ds.outputs))
        assert np.linalg.norm(model.loss_gradient(ds, w_star)) <= bound

    def test_minimizer_beats_random_probes(self):
        cfg = small_config(num_devices=2, samples=30, model_dim=4)
        ds = _dataset(cfg, np.random.default_rng(12))
        w_star = model.exact_minimizer(ds)
        best = model.loss(ds, w_star)
        rng = np.random.default_rng(13)
        for _ in range(100):
            assert best <= model.loss(ds, w_star + rng.standard_normal(4))


class TestConvexityParams:
    def test_pure_regularizer(self):
        ds = model.RidgeDataset(np.zeros((4, 2)), np.zeros(4), ((0, 4),), 0.7, np.zeros(2))
        mu, omega = model.strong_convexity_params(ds)
        assert mu == pytest.approx(0.7) and omega == pytest.approx(0.7)

    def test_isotropic_case(self):
        ds = model.RidgeDataset(np.eye(2), np.zeros(2), ((0, 2),), 0.1, np.zeros(2))
        mu, omega = model.strong_convexity_params(ds)
        assert mu == pytest.approx(0.6) and omega == pytest.approx(0.6)

    def test_against_power_iteration(self):
        cfg = small_config(num_devices=2, samples=25, model_dim=5)
        ds = _dataset(cfg, np.random.default_rng(14))
        hess = ds.inputs.T @ ds.inputs / ds.num_samples + ds.reg_coefficient * np.eye(5)
        mu, omega = model.strong_convexity_params(ds)
        lam_min, lam_max = power_iteration_extremes(lambda v: hess @ v, 5, seed=3)
        assert abs(mu - lam_min) < 1e-8 and abs(omega - lam_max) < 1e-8


class TestLocalGradient:
    def test_zero_gradients(self):
        ds = model.RidgeDataset(np.zeros((4, 2)), np.zeros(4), ((0, 2), (2, 4)), 1e-15, np.zeros(2))
        g = model.local_gradient(ds, 0, np.zeros(2), clip_level=1.0)
        assert np.allclose(g, 0.0, atol=1e-14)

    def test_clip_boundary(self):
        # single sample whose raw gradient norm is 10 sqrt(d) L
        d = 4
        clip = 0.5
        target = 10 * math.sqrt(d) * clip
        u = np.zeros(d)
        u[0] = 1.0
        ds = model.RidgeDataset(u[None, :], np.array([-target]), ((0, 1),), 1e-15, np.zeros(d))
        g = model.local_gradient(ds, 0, np.zeros(d), clip_level=clip)
        assert np.linalg.norm(g) == pytest.approx(math.sqrt(d) * clip, rel=1e-9)

    def test_unclipped_sums_to_global_gradient(self):
        cfg = small_config(num_devices=3, samples=20, model_dim=4)
        ds = _dataset(cfg, np.random.default_rng(15))
        w = np.random.default_rng(16).standard_normal(4)
        total = sum(
            cfg.samples_per_device[m] * model.local_gradient(ds, m, w, clip_level=1e9)
            for m in range(3)
        )
        assert np.allclose(total, ds.num_samples * model.loss_gradient(ds, w), atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), clip=st.floats(0.01, 10.0))
    def test_clipped_norm_bound(self, seed, clip):
        cfg = small_config(num_devices=2, samples=8, model_dim=3)
        rng = np.random.default_rng(seed)
        ds = _dataset(cfg, rng)
        w = rng.standard_normal(3) * 5
        for m in range(2):
            g = model.local_gradient(ds, m, w, clip_level=clip)
            assert np.linalg.norm(g) <= math.sqrt(3) * clip * (1 + 1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_convexity_sandwich(self, seed):
        cfg = small_config(num_devices=2, samples=30, model_dim=4)
        rng = np.random.default_rng(seed)
        ds = _dataset(cfg, rng)
        mu, omega = model.strong_convexity_params(ds)
        w1 = rng.standard_normal(4)
        w2 = rng.standard_normal(4)
        dw = w1 - w2
        dg = model.loss_gradient(ds, w1) - model.loss_gradient(ds, w2)
        ratio = (dg @ dw) / (dw @ dw)
        assert mu - 1e-9 <= ratio <= omega + 1e-9
