import numpy as np
import pytest

from otafl import airsim, convergence, model, planner, privacy
from otafl.privacy import TransceiverDesign

from helpers import random_channel, small_config


class TestContraction:
    def test_equal_parameters(self):
        assert convergence.contraction_factor(2.0, 2.0) == 0.0

    def test_half(self):
        assert convergence.contraction_factor(1.0, 2.0) == 0.5

    def test_rejects_bad_order(self):
        with pytest.raises(ValueError):
            convergence.contraction_factor(2.0, 1.0)

    def test_matches_hessian_eigens(self):
        cfg = small_config(num_devices=10, samples=100, model_dim=20)
        ds = model.generate_ridge_dataset(cfg, 1e-3, np.random.default_rng(0))
        mu, omega = model.strong_convexity_params(ds)
        hess = ds.inputs.T @ ds.inputs / ds.num_samples + 1e-3 * np.eye(20)
        eigs = np.linalg.eigvalsh(hess)
        assert convergence.contraction_factor(mu, omega) == pytest.approx(
            1 - eigs[0] / eigs[-1], abs=1e-10
        )


class TestNoiseTerm:
    def test_direct_value(self):
        cfg = small_config(num_devices=1, num_antennas=1, model_dim=1,
                           samples=1, noise_var=1.0, omega=1.0)
        ch = np.array([[0.3 + 0.1j]])
        d = TransceiverDesign(np.array([1.0 + 0j]), np.array([0.0]), 1.0,
                              np.array([1.0 + 0j]), np.array([[1.0 + 0j]]))
        assert convergence.noise_term_A(d, ch, cfg) == pytest.approx(0.5)

    def test_vanishes_with_large_eta(self):
        cfg = small_config()
        rng = np.random.default_rng(1)
        ch = random_channel(cfg, rng)
        f0 = ch[:, 0] / np.linalg.norm(ch[:, 0])
        d = TransceiverDesign(np.ones(2, complex), np.zeros(2), 1e12, f0, np.tile(f0, (2, 1)))
        assert convergence.noise_term_A(d, ch, cfg) < 1e-10

    def test_linear_in_noise_var(self):
        cfg = small_config(noise_var=0.2)
        rng = np.random.default_rng(2)
        ch = random_channel(cfg, rng)
        f0 = ch[:, 0] / np.linalg.norm(ch[:, 0])
        d = TransceiverDesign(np.ones(2, complex), np.zeros(2), 2.0, f0, np.tile(f0, (2, 1)))
        one = convergence.noise_term_A(d, ch, cfg)
        two = convergence.noise_term_A(d, ch, cfg.with_updates(noise_var=0.4))
        assert two == pytest.approx(2 * one)


class TestMismatchTerm:
    def test_aligned_design_vanishes(self):
        cfg = small_config(num_devices=3, num_antennas=4)
        rng = np.random.default_rng(3)
        ch = random_channel(cfg, rng)
        f0 = ch[:, 1] / np.linalg.norm(ch[:, 1])
        s1 = planner.s1_closed_form(0.7, f0, ch, cfg)
        d = TransceiverDesign(s1, np.zeros(3), 0.7, f0, np.tile(f0, (3, 1)))
        grads = rng.standard_normal((3, cfg.model_dim))
        assert convergence.mismatch_term_Ct(d, ch, cfg, grads) <= 1e-18

    def test_zero_gradients(self):
        cfg = small_config()
        rng = np.random.default_rng(4)
        ch = random_channel(cfg, rng)
        f0 = ch[:, 0] / np.linalg.norm(ch[:, 0])
        d = TransceiverDesign(np.ones(2, complex), np.zeros(2), 1.0, f0, np.tile(f0, (2, 1)))
        assert convergence.mismatch_term_Ct(d, ch, cfg, np.zeros((2, 3))) == 0.0

    def test_matches_direct_resummation(self):
        cfg = small_config(num_devices=3, num_antennas=2, model_dim=5)
        rng = np.random.default_rng(5)
        ch = random_channel(cfg, rng)
        f0 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        f0 /= np.linalg.norm(f0)
        d = TransceiverDesign(
            (rng.uniform(0.1, 1, 3) * np.exp(1j * rng.uniform(0, 6, 3))),
            rng.uniform(0, 0.5, 3), 0.9, f0, np.tile(f0, (3, 1)),
        )
        grads = rng.standard_normal((3, 5))
        # independent per-entry re-summation
        total = 0.0
        for i in range(5):
            acc = 0.0 + 0.0j
            for m in range(3):
                coeff = cfg.samples_per_device[m] - (
                    np.vdot(f0, ch[:, m]) * d.s1[m] / (np.sqrt(d.eta) * cfg.clip_level)
                )
                acc += coeff * grads[m, i]
            total += abs(acc) ** 2
        expected = total / (2 * cfg.smoothness * cfg.total_samples**2)
        got = convergence.mismatch_term_Ct(d, ch, cfg, grads)
        assert got == pytest.approx(expected, rel=1e-12)


class TestLossUpperBound:
    def test_noiseless_geometric_decay(self):
        value = convergence.loss_upper_bound(2.0, 5.0, 0.4, 0.0, 0.0, rounds=200)
        assert value == pytest.approx(2.0, abs=1e-12)

    def test_single_round_unrolling(self):
        value = convergence.loss_upper_bound(1.0, 3.0, 0.5, 0.25, [0.125], rounds=1)
        assert value == pytest.approx(1.0 + 0.5 * 3.0 + 0.25 + 0.125)

    def test_monotone_in_noise_terms(self):
        base = convergence.loss_upper_bound(1.0, 2.0, 0.5, 0.1, 0.05, rounds=5)
        more_a = convergence.loss_upper_bound(1.0, 2.0, 0.5, 0.2, 0.05, rounds=5)
        more_c = convergence.loss_upper_bound(1.0, 2.0, 0.5, 0.1, 0.06, rounds=5)
        assert more_a > base and more_c > base


class TestErrorDecomposition:
    def test_mc_matches_a_plus_ct(self):
        # deliberately misaligned design so both terms are exercised
        cfg = small_config(num_devices=3, num_antennas=4, model_dim=6,
                           samples=10, noise_var=0.3)
        rng = np.random.default_rng(6)
        ch = random_channel(cfg, rng)
        ds = model.generate_ridge_dataset(cfg, 1e-3, rng)
        mu, omega = model.strong_convexity_params(ds)
        cfg = cfg.with_updates(strong_convexity=mu, smoothness=omega)
        f0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        f0 /= np.linalg.norm(f0)
        d = TransceiverDesign(
            rng.uniform(0.2, 0.6, 3).astype(complex), rng.uniform(0.1, 0.4, 3),
            0.8, f0, np.tile(f0, (3, 1)),
        )
        w = rng.standard_normal(6)
        grads = np.stack([model.local_gradient(ds, m, w, cfg.clip_level) for m in range(3)])
        a_term = convergence.noise_term_A(d, ch, cfg)
        c_term = convergence.mismatch_term_Ct(d, ch, cfg, grads)
        k = cfg.total_samples
        weighted = cfg.device_sizes @ grads

        draws = 20_000
        errs = np.empty(draws)
        for i in range(draws):
            block = airsim.transmit_round(d, grads, rng, cfg, ch)
            est = airsim.extract(block, d.f0) / np.sqrt(d.eta)
            errs[i] = np.linalg.norm(weighted - est) ** 2 / k**2
        half = errs / (2 * cfg.smoothness)
        se = half.std(ddof=1) / np.sqrt(draws)
        assert abs(half.mean() - (a_term + c_term)) <= 3 * se
