"""Closed-form optimal single-antenna transceiver and its optimality-conditions checker.

With one receive antenna the combiner and all extractors degenerate to unit
scalars, and the design reduces to a two-regime power rule around the round
threshold T0: privacy binds for T >= T0 (scale all gradient powers down until
the channel noise alone protects every device), power binds otherwise. Either
way no artificial noise is needed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import Array, SystemConfig
from .privacy import TransceiverDesign, phi_constants

NOISE_LIMITED = "noise-limited"
POWER_LIMITED = "power-limited"


class MisoRegime(str, Enum):
    NOISE_LIMITED = NOISE_LIMITED
    POWER_LIMITED = POWER_LIMITED


@dataclass(frozen=True)
class MisoSolution:
    design: TransceiverDesign
    t0_threshold: float
    regime: MisoRegime

    def to_json(self) -> str:
        return json.dumps(
            {
                "design": json.loads(self.design.to_json()),
                "t0_threshold": self.t0_threshold,
                "regime": self.regime.value,
            },
            indent=2,
        )


def _require_miso(cfg: SystemConfig) -> None:
    if cfg.num_antennas != 1:
        raise ValueError("single-antenna routine called with num_antennas != 1")


def t0_threshold(cfg: SystemConfig, channel: Array) -> float:
    """Round threshold T0 = sigma_z^2 / (P_max max_m phi_m) * max_m K_m^2 / |h_m|^2."""
    _require_miso(cfg)
    phi = phi_constants(cfg)
    max_phi = float(phi.max())
    if max_phi == 0.0:
        return math.inf
    gains = np.abs(channel[0, :]) ** 2
    ratio = float(np.max(cfg.device_sizes**2 / gains))
    return cfg.noise_var / (cfg.max_power * max_phi) * ratio


def aligned_s1(eta: float, channel_row: Array, sizes: Array, clip_level: float) -> Array:
    """s1_m = sqrt(eta) L K_m conj(h_m) / |h_m|^2 (receiver-aligned scaling)."""
    h = channel_row
    return math.sqrt(eta) * clip_level * sizes * h.conj() / (h * h.conj()).real


def noise_limited_eta(cfg: SystemConfig, max_phi: float, total_noise_var: float) -> float:
    return total_noise_var / (cfg.clip_level**2 * cfg.rounds * max_phi)


def power_limited_eta(cfg: SystemConfig, channel: Array) -> float:
    gains = np.abs(channel[0, :]) ** 2
    return cfg.max_power / cfg.clip_level**2 * float(np.min(gains / cfg.device_sizes**2))


def miso_optimal_design(cfg: SystemConfig, channel: Array) -> MisoSolution:
    """Optimal design for N = 1; zero artificial noise in both regimes."""
    _require_miso(cfg)
    t0 = t0_threshold(cfg, channel)
    phi = phi_constants(cfg)
    if cfg.rounds >= t0:
        eta = noise_limited_eta(cfg, float(phi.max()), cfg.noise_var)
        regime = MisoRegime.NOISE_LIMITED
    else:
        eta = power_limited_eta(cfg, channel)
        regime = MisoRegime.POWER_LIMITED
    s1 = aligned_s1(eta, channel[0, :], cfg.device_sizes, cfg.clip_level)
    design = TransceiverDesign(
        s1=s1,
        s2=np.zeros(cfg.num_devices),
        eta=eta,
        f0=np.ones(1, dtype=complex),
        extractors=np.ones((cfg.num_devices, 1), dtype=complex),
    )
    design.validate(cfg)
    return MisoSolution(design=design, t0_threshold=t0, regime=regime)


def check_optimality_conditions(
    sol_or_design, cfg: SystemConfig, channel: Array, tol: float = 1e-8
) -> tuple:
    """Verify the two-regime optimality conditions; returns (ok, residual report).

    Accepts any design (e.g. one with nonzero artificial noise constructed from
    the underdetermined T >= T0 system), not just the canonical solution.
    """
    _require_miso(cfg)
    design = sol_or_design.design if isinstance(sol_or_design, MisoSolution) else sol_or_design
    h = channel[0, :]
    gains = np.abs(h) ** 2
    sizes = cfg.device_sizes
    phi = phi_constants(cfg)
    max_phi = float(phi.max())
    t0 = t0_threshold(cfg, channel)
    p = cfg.max_power
    l2 = cfg.clip_level**2

    residuals = {}
    # Receiver alignment: h_m s1_m / (sqrt(eta) L) = K_m for every device.
    aligned = h * design.s1 / (math.sqrt(design.eta) * cfg.clip_level)
    residuals["alignment"] = float(np.max(np.abs(aligned - sizes)) / np.max(sizes))

    power = np.abs(design.s1) ** 2 + design.s2**2
    residuals["power_feasibility"] = float(np.max(power - p) / p)

    total_noise = float(gains @ design.s2**2 + cfg.noise_var)
    if cfg.rounds >= t0:
        # Privacy binds: eta sits at the noise bound and every device's revealed
        # power matches it; the power constraint must retain slack.
        eta_target = total_noise / (l2 * cfg.rounds * max_phi)
        residuals["eta_at_noise_bound"] = abs(design.eta - eta_target) / eta_target
        revealed = gains * np.abs(design.s1) ** 2 / sizes**2
        target = total_noise / (cfg.rounds * max_phi)
        residuals["revealed_power_balance"] = float(np.max(np.abs(revealed - target)) / target)
        margin = float(np.min(gains * (p - design.s2**2) / sizes**2))
        residuals["power_margin"] = max(target - margin, 0.0) / target
    else:
        eta_target = power_limited_eta(cfg, channel)
        residuals["eta_at_power_bound"] = abs(design.eta - eta_target) / eta_target
        residuals["zero_artificial_noise"] = float(np.max(design.s2))

    ok = all(v <= tol for v in residuals.values())
    return ok, residuals
