"""DP accounting at the curious server: sensitivity, achieved epsilon, MMSE extractors, SINR.

The achieved privacy level is the tight value of the Gaussian-mechanism bound:
eps^2 = 8 |f^H h_m|^2 |s1_m|^2 d T ln(1/delta_m) / (K_m^2 sigma_tot^2), where
sigma_tot^2 = sum_m' |f^H h_m'|^2 s2_m'^2 + sigma_z^2 is the noise variance seen
by extractor f.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .model import Array, SystemConfig


@dataclass(frozen=True)
class TransceiverDesign:
    """Decision variables: gradient scalars, noise magnitudes, combiner, and extractors."""

    s1: Array            # complex, per-device gradient scalar
    s2: Array            # nonnegative real, per-device artificial-noise magnitude
    eta: float           # aggregation normalizer, > 0
    f0: Array            # unit-norm combiner, length N
    extractors: Array    # M x N, row m is the unit-norm extractor f_m

    def __post_init__(self):
        object.__setattr__(self, "s1", np.asarray(self.s1, dtype=complex))
        object.__setattr__(self, "s2", np.asarray(self.s2, dtype=float))
        object.__setattr__(self, "f0", np.asarray(self.f0, dtype=complex))
        object.__setattr__(self, "extractors", np.asarray(self.extractors, dtype=complex))
        if np.any(self.s2 < 0):
            raise ValueError("s2 magnitudes must be nonnegative")
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    def validate(self, cfg: SystemConfig, tol: float = 1e-9) -> None:
        if abs(np.linalg.norm(self.f0) - 1.0) > tol:
            raise ValueError("f0 must be unit norm")
        norms = np.linalg.norm(self.extractors, axis=1)
        if np.any(np.abs(norms - 1.0) > tol):
            raise ValueError("each extractor must be unit norm")
        power = np.abs(self.s1) ** 2 + self.s2**2
        if np.any(power > cfg.max_power + tol):
            raise ValueError("per-device power constraint violated")

    def to_json(self) -> str:
        doc = {
            "s1_real": self.s1.real.tolist(),
            "s1_imag": self.s1.imag.tolist(),
            "s2": self.s2.tolist(),
            "eta": self.eta,
            "f0_real": self.f0.real.tolist(),
            "f0_imag": self.f0.imag.tolist(),
            "extractors_real": self.extractors.real.tolist(),
            "extractors_imag": self.extractors.imag.tolist(),
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TransceiverDesign":
        doc = json.loads(text)
        return cls(
            s1=np.asarray(doc["s1_real"]) + 1j * np.asarray(doc["s1_imag"]),
            s2=np.asarray(doc["s2"]),
            eta=float(doc["eta"]),
            f0=np.asarray(doc["f0_real"]) + 1j * np.asarray(doc["f0_imag"]),
            extractors=np.asarray(doc["extractors_real"]) + 1j * np.asarray(doc["extractors_imag"]),
        )


@dataclass(frozen=True)
class DpReport:
    """Per-device DP analytics for a given design."""

    phi: Array           # 8 d ln(1/delta) / eps_wd^2
    sensitivity: Array   # disclosed-signal sensitivity bound
    eps_bs: Array        # achieved epsilon at the server
    feasible: Array      # eps_bs <= eps_wd, boolean

    def to_json(self) -> str:
        return json.dumps(
            {
                "phi": self.phi.tolist(),
                "sensitivity": self.sensitivity.tolist(),
                "eps_bs": self.eps_bs.tolist(),
                "feasible": [bool(b) for b in self.feasible],
            },
            indent=2,
        )


def phi_constant(cfg: SystemConfig, m: int) -> float:
    """DP constraint coefficient 8 d ln(1/delta_m) / eps_m^2; zero when eps_m is inf."""
    delta = cfg.dp_delta[m]
    if not 0 < delta < 1:
        raise ValueError("dp_delta must lie in (0, 1)")
    eps = cfg.dp_epsilon[m]
    if math.isinf(eps):
        return 0.0
    return 8.0 * cfg.model_dim * math.log(1.0 / delta) / eps**2


def phi_constants(cfg: SystemConfig) -> Array:
    return np.array([phi_constant(cfg, m) for m in range(cfg.num_devices)])


def sensitivity_bound(f_m: Array, h_m: Array, s1_m: complex, k_m: int, d: int, clip_level: float) -> float:
    """Sensitivity of the disclosed signal: 2 sqrt(d) |f^H h| |s1| / K_m.

    The clip level cancels against the transmit normalization and is accepted
    only for signature symmetry.
    """
    del clip_level
    gain = abs(np.vdot(f_m, h_m))
    return 2.0 * math.sqrt(d) * gain * abs(s1_m) / k_m


def extractor_noise_var(f: Array, channel: Array, s2: Array, noise_var: float) -> float:
    """Total Gaussian noise variance seen through extractor f."""
    gains = np.abs(f.conj() @ channel) ** 2
    return float(gains @ (s2**2) + noise_var)


def epsilon_bs(design: TransceiverDesign, channel: Array, cfg: SystemConfig, m: int) -> float:
    """Tight achieved epsilon at the server for device m under the design's extractor."""
    f = design.extractors[m]
    sigma_tot = extractor_noise_var(f, channel, design.s2, cfg.noise_var)
    if sigma_tot <= 0:
        raise ValueError("total noise power must be positive")
    gain = abs(np.vdot(f, channel[:, m])) ** 2
    k_m = cfg.samples_per_device[m]
    num = 8.0 * gain * abs(design.s1[m]) ** 2 * cfg.model_dim * cfg.rounds * math.log(1.0 / cfg.dp_delta[m])
    return math.sqrt(num / (k_m**2 * sigma_tot))


def sinr(f: Array, m: int, design: TransceiverDesign, channel: Array, cfg: SystemConfig) -> float:
    """Post-combining SINR of device m's gradient signal against the other devices' noise."""
    proj = f.conj() @ channel
    signal = abs(proj[m]) ** 2 * abs(design.s1[m]) ** 2
    interf = np.abs(proj) ** 2 * design.s2**2
    denom = float(interf.sum() - interf[m] + cfg.noise_var)
    return float(signal / denom)


def leakage_matrix(channel: Array, design: TransceiverDesign, m: int) -> Array:
    """Effective channel seen by extractor m: device m's gradient column, others' noise columns."""
    cols = channel * design.s2[None, :]
    cols = cols.astype(complex, copy=True)
    cols[:, m] = channel[:, m] * design.s1[m]
    return cols


def mmse_extractor(channel: Array, design: TransceiverDesign, cfg: SystemConfig, m: int) -> Array:
    """SINR-optimal unit-norm extractor for device m (MMSE receiver of the leakage channel)."""
    h_eff = leakage_matrix(channel, design, m)
    gram = h_eff.conj().T @ h_eff + cfg.noise_var * np.eye(cfg.num_devices)
    e_m = np.zeros(cfg.num_devices)
    e_m[m] = 1.0
    f = h_eff @ np.linalg.solve(gram, e_m)
    norm = np.linalg.norm(f)
    if norm < 1e-300:
        # s1_m = 0 leaks nothing; any direction is optimal, return the matched one.
        f = channel[:, m]
        norm = np.linalg.norm(f)
    return f / norm


def dp_report(design: TransceiverDesign, channel: Array, cfg: SystemConfig) -> DpReport:
    phi = phi_constants(cfg)
    sens = np.array(
        [
            sensitivity_bound(
                design.extractors[m], channel[:, m], design.s1[m],
                cfg.samples_per_device[m], cfg.model_dim, cfg.clip_level,
            )
            for m in range(cfg.num_devices)
        ]
    )
    eps = np.array([epsilon_bs(design, channel, cfg, m) for m in range(cfg.num_devices)])
    targets = np.asarray(cfg.dp_epsilon)
    feasible = eps <= targets * (1.0 + 1e-9)
    return DpReport(phi=phi, sensitivity=sens, eps_bs=eps, feasible=feasible)


def empirical_privacy_tail(
    sensitivity: float,
    noise_std: float,
    rounds: int,
    eps: float,
    mc_draws: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo Pr(|sum_t L_t| > eps) for the scalar Gaussian mechanism.

    Per-round privacy loss L_t ~ Normal(Delta^2 / (2 sigma^2), Delta^2 / sigma^2).
    """
    if noise_std <= 0:
        raise ValueError("noise_std must be positive")
    if sensitivity == 0.0:
        return 0.0
    nu = (sensitivity / noise_std) ** 2
    losses = rng.normal(loc=nu / 2.0, scale=math.sqrt(nu), size=(mc_draws, rounds))
    totals = losses.sum(axis=1)
    return float(np.mean(np.abs(totals) > eps))
