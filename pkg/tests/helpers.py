"""Shared test fixtures and independent oracles.

The oracles here are deliberately written against the math, not against the
library code paths they check: brute-force grids, finite differences, power
iteration, vertex enumeration, and direct re-summations.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from otafl.model import SystemConfig


def small_config(
    num_devices=2,
    num_antennas=2,
    model_dim=3,
    rounds=5,
    samples=4,
    max_power=1.0,
    noise_var=0.1,
    clip_level=1.0,
    epsilon=5.0,
    delta=1e-3,
    mu=0.5,
    omega=1.5,
    seed=0,
) -> SystemConfig:
    m = num_devices
    return SystemConfig(
        num_devices=m,
        num_antennas=num_antennas,
        model_dim=model_dim,
        rounds=rounds,
        samples_per_device=(samples,) * m,
        max_power=max_power,
        noise_var=noise_var,
        clip_level=clip_level,
        dp_epsilon=(epsilon,) * m,
        dp_delta=(delta,) * m,
        strong_convexity=mu,
        smoothness=omega,
        rng_seed=seed,
    )


def random_channel(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    shape = (cfg.num_antennas, cfg.num_devices)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def finite_difference_gradient(fun, x, h=1e-6):
    """Central finite differences, the classic first-order oracle."""
    grad = np.zeros_like(x, dtype=float)
    for i in range(x.size):
        step = np.zeros_like(x, dtype=float)
        step[i] = h
        grad[i] = (fun(x + step) - fun(x - step)) / (2.0 * h)
    return grad


def power_iteration_extremes(matvec, dim, iters=5000, seed=0):
    """(lambda_min, lambda_max) of a symmetric PSD operator via power iteration
    on A and on (sigma I - A)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = matvec(v)
        v = w / np.linalg.norm(w)
    lam_max = float(v @ matvec(v))
    shift = lam_max * (1.0 + 1e-3)
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    for _ in range(iters):
        w = shift * u - matvec(u)
        u = w / np.linalg.norm(w)
    lam_min = float(u @ matvec(u))
    return lam_min, lam_max


def miso_grid_objective(cfg, channel, phi, points=200):
    """Dense grid search over (s2 in [0, sqrt(P)]^M, analytic optimal eta).

    For fixed s2 the objective (total noise power / eta) is minimized by the
    largest feasible eta, which has a closed form, so gridding eta separately
    is dominated; resolution is `points` per s2 dimension.
    """
    m = cfg.num_devices
    gains = np.abs(channel[0, :]) ** 2
    sizes = cfg.device_sizes
    p_max = cfg.max_power
    l2 = cfg.clip_level**2
    max_phi = float(np.max(phi))
    axis = np.linspace(0.0, math.sqrt(p_max), points)

    best = math.inf
    best_point = None
    grids = np.meshgrid(*([axis] * m), indexing="ij")
    s2sq = np.stack([g.reshape(-1) ** 2 for g in grids], axis=1)  # (points^M, M)
    chunk = 200_000
    for lo in range(0, s2sq.shape[0], chunk):
        block = s2sq[lo : lo + chunk]
        total_noise = block @ gains + cfg.noise_var
        # eta caps: DP (noise-limited) and per-device power
        eta_dp = total_noise / (l2 * cfg.rounds * max_phi) if max_phi > 0 else np.inf
        headroom = p_max - block
        feasible = np.all(headroom >= 0, axis=1)
        eta_pow = np.min(gains[None, :] * headroom / sizes[None, :] ** 2, axis=1) / l2
        eta = np.minimum(eta_dp, eta_pow)
        with np.errstate(divide="ignore", invalid="ignore"):
            obj = np.where(feasible & (eta > 0), total_noise / eta, np.inf)
        idx = int(np.argmin(obj))
        if obj[idx] < best:
            best = float(obj[idx])
            best_point = block[idx].copy()
    # Objective here is (total noise)/eta; the bound term A differs by the
    # constant d/(2 omega K^2), which cancels in relative comparisons.
    return best, best_point


def lp_vertex_oracle(costs, g_mat, rhs, box):
    """Exhaustive vertex enumeration for the M=3 box-covering LP."""
    m = costs.size
    rows = [(g_mat[i], rhs[i]) for i in range(m)]
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        rows.append((e.copy(), 0.0))
        rows.append((e.copy(), box[j]))
    best = math.inf
    for combo in itertools.combinations(range(len(rows)), m):
        a = np.array([rows[k][0] for k in combo])
        b = np.array([rows[k][1] for k in combo])
        try:
            x = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            continue
        if (
            np.all(g_mat @ x >= rhs - 1e-9)
            and np.all(x >= -1e-9)
            and np.all(x <= box + 1e-9)
        ):
            best = min(best, float(costs @ x))
    return best


def sphere_grid_objective(problem, degrees=1.0):
    """Rank-one objective minimized over a 1-degree grid of the N=2 unit sphere,
    with the scalar normalizer line-searched in closed form per direction."""
    theta = np.deg2rad(np.arange(0.0, 90.0 + 1e-9, degrees))
    phase = np.deg2rad(np.arange(0.0, 360.0, degrees))
    th, ph = np.meshgrid(theta, phase, indexing="ij")
    dirs = np.stack([np.cos(th), np.sin(th) * np.exp(1j * ph)], axis=-1).reshape(-1, 2)
    proj = np.abs(dirs @ problem.channels.conj()) ** 2
    noise = proj @ problem.noise_weights + problem.tau_weight
    inv_eta = np.max(problem.lower_bounds[None, :] / np.maximum(proj, 1e-300), axis=1)
    return float(np.min(noise * inv_eta))


def rank_one_objective(problem, f0):
    """Objective of the rank-one point F = f0 f0^H / eta with the max feasible eta."""
    proj = np.abs(f0.conj() @ problem.channels) ** 2
    eta = float(np.min(proj / problem.lower_bounds))
    return float((proj @ problem.noise_weights + problem.tau_weight) / eta)
