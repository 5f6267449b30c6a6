"""Expected-loss upper bound after T rounds and its ingredients.

The bound is F(w*) + B^T (F(w0) - F(w*)) + A (1 - B^T) / (1 - B)
            + sum_t B^(T-t) C_t,
with contraction B = 1 - mu/omega, noise floor A driven by artificial plus
channel noise after combining, and C_t the aggregation mismatch on the
realized gradients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import Array, SystemConfig
from .privacy import TransceiverDesign


@dataclass(frozen=True)
class BoundReport:
    contraction: float        # B in [0, 1)
    noise_term: float         # A >= 0
    mismatch_terms: Array     # C_t, length T
    initial_gap: float        # F(w0) - F(w*)
    optimal_loss: float       # F(w*)
    bound_value: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "contraction": self.contraction,
                "noise_term": self.noise_term,
                "mismatch_terms": np.asarray(self.mismatch_terms).tolist(),
                "initial_gap": self.initial_gap,
                "optimal_loss": self.optimal_loss,
                "bound_value": self.bound_value,
            },
            indent=2,
        )


def contraction_factor(mu: float, omega: float) -> float:
    """B = 1 - mu/omega for the 1/omega learning rate."""
    if not 0 < mu <= omega:
        raise ValueError("need 0 < mu <= omega")
    return 1.0 - mu / omega


def noise_term_A(design: TransceiverDesign, channel: Array, cfg: SystemConfig) -> float:
    """Per-round noise floor d (sum_m |f0^H h_m|^2 s2_m^2 + sigma_z^2) / (2 omega K^2 eta)."""
    gains = np.abs(design.f0.conj() @ channel) ** 2
    noise_power = float(gains @ (design.s2**2) + cfg.noise_var)
    k = cfg.total_samples
    return cfg.model_dim * noise_power / (2.0 * cfg.smoothness * k**2 * design.eta)


def mismatch_coefficients(design: TransceiverDesign, channel: Array, cfg: SystemConfig) -> Array:
    """K_m - f0^H h_m s1_m / (sqrt(eta) L), zero under exact alignment."""
    proj = design.f0.conj() @ channel
    return cfg.device_sizes - proj * design.s1 / (np.sqrt(design.eta) * cfg.clip_level)


def mismatch_term_Ct(
    design: TransceiverDesign, channel: Array, cfg: SystemConfig, grads: Array
) -> float:
    """Aggregation-mismatch term evaluated on the supplied per-device gradients (M x d)."""
    coeffs = mismatch_coefficients(design, channel, cfg)
    mixed = coeffs @ grads
    k = cfg.total_samples
    return float((np.abs(mixed) ** 2).sum() / (2.0 * cfg.smoothness * k**2))


def loss_upper_bound(
    optimal_loss: float,
    initial_gap: float,
    contraction: float,
    noise_term: float,
    mismatch_terms,
    rounds: int,
) -> float:
    """Right-hand side of the T-round expected-loss bound."""
    if not 0 <= contraction < 1:
        raise ValueError("contraction must lie in [0, 1)")
    b_pow_t = contraction**rounds
    geo = (1.0 - b_pow_t) / (1.0 - contraction)
    c = np.broadcast_to(np.asarray(mismatch_terms, dtype=float), (rounds,))
    weights = contraction ** (rounds - np.arange(1, rounds + 1))
    return float(optimal_loss + b_pow_t * initial_gap + noise_term * geo + weights @ c)


def bound_report(
    design: TransceiverDesign,
    channel: Array,
    cfg: SystemConfig,
    optimal_loss: float,
    initial_loss: float,
    mismatch_terms=0.0,
) -> BoundReport:
    b = contraction_factor(cfg.strong_convexity, cfg.smoothness)
    a = noise_term_A(design, channel, cfg)
    c = np.broadcast_to(np.asarray(mismatch_terms, dtype=float), (cfg.rounds,)).copy()
    gap0 = initial_loss - optimal_loss
    value = loss_upper_bound(optimal_loss, gap0, b, a, c, cfg.rounds)
    return BoundReport(
        contraction=b, noise_term=a, mismatch_terms=c,
        initial_gap=gap0, optimal_loss=optimal_loss, bound_value=value,
    )
