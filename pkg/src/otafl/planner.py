"""Alternating transceiver optimization: extractors, combiner SDP, noise LP, gradient scalars.

Per outer iteration: refresh the server-side MMSE extractors from the current
scalars, solve the penalized combiner SDP for (F, tau), factor it into
(f0, eta), re-optimize the artificial-noise powers by LP, and set the gradient
scalars to the zero-mismatch closed form. Early-stops when the noise objective
stalls. The best feasible iterate seen is returned (the alternation is not
guaranteed monotone because each extractor refresh tightens the constraints).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .conic import LpProblem, SdpSubproblem
from .convergence import noise_term_A
from .model import Array, SystemConfig
from .privacy import DpReport, TransceiverDesign, dp_report, mmse_extractor, phi_constants


class DegenerateChannel(Exception):
    """Combiner orthogonal to some device channel; the aligned scalars are undefined."""


_DEGENERATE_GAIN = 1e-12


@dataclass
class PlannerTrace:
    objective_values: list = field(default_factory=list)   # noise term A per outer iteration
    feasibility_residuals: list = field(default_factory=list)
    early_stop_iteration: int | None = None
    dp: DpReport | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "objective_values": self.objective_values,
                "feasibility_residuals": self.feasibility_residuals,
                "early_stop_iteration": self.early_stop_iteration,
                "dp": json.loads(self.dp.to_json()) if self.dp is not None else None,
            },
            indent=2,
        )


def s1_closed_form(eta: float, f0: Array, channel: Array, cfg: SystemConfig) -> Array:
    """Zero-mismatch scalars s1_m = sqrt(eta) L K_m conj(f0^H h_m) / |f0^H h_m|^2."""
    proj = f0.conj() @ channel
    gain_sq = (proj * proj.conj()).real
    if np.any(np.sqrt(gain_sq) < _DEGENERATE_GAIN):
        raise DegenerateChannel("combiner nearly orthogonal to a device channel")
    return math.sqrt(eta) * cfg.clip_level * cfg.device_sizes * proj.conj() / gain_sq


def feasibility_check(design: TransceiverDesign, cfg: SystemConfig, channel: Array) -> dict:
    """Relative residuals of the DP, power, and norm constraints (positive = violated)."""
    phi = phi_constants(cfg)
    sizes = cfg.device_sizes
    report = {}

    dp_res = []
    for m in range(cfg.num_devices):
        f = design.extractors[m]
        proj = f.conj() @ channel
        noise = float(np.abs(proj) ** 2 @ design.s2**2 + cfg.noise_var)
        revealed = abs(proj[m]) ** 2 * abs(design.s1[m]) ** 2 * cfg.rounds * phi[m] / sizes[m] ** 2
        dp_res.append((revealed - noise) / max(noise, 1e-300))
    report["dp"] = float(np.max(dp_res))

    power = np.abs(design.s1) ** 2 + design.s2**2
    report["power"] = float(np.max(power - cfg.max_power) / cfg.max_power)
    report["combiner_norm"] = abs(float(np.linalg.norm(design.f0)) - 1.0)
    report["extractor_norm"] = float(np.max(np.abs(np.linalg.norm(design.extractors, axis=1) - 1.0)))
    report["max_residual"] = max(report["dp"], report["power"], report["combiner_norm"], report["extractor_norm"])
    return report


def _refresh_extractors(channel, design, cfg):
    return np.stack([mmse_extractor(channel, design, cfg, m) for m in range(cfg.num_devices)])


def _dp_lower_bounds(extractors, channel, cfg, s2, phi):
    """b_m = |f*_m^H h_m|^2 T L^2 phi_m / (sum_m' |f*_m^H h_m'|^2 s2_m'^2 + sigma_z^2)."""
    b = np.zeros(cfg.num_devices)
    for m in range(cfg.num_devices):
        if phi[m] == 0.0:
            continue
        proj = extractors[m].conj() @ channel
        noise = float(np.abs(proj) ** 2 @ s2**2 + cfg.noise_var)
        b[m] = abs(proj[m]) ** 2 * cfg.rounds * cfg.clip_level**2 * phi[m] / noise
    return b


def _power_lower_bounds(cfg, s2):
    headroom = np.maximum(cfg.max_power - s2**2, 1e-9 * cfg.max_power)
    return cfg.device_sizes**2 * cfg.clip_level**2 / headroom


def optimize_transceivers(
    cfg: SystemConfig,
    channel: Array,
    rng: np.random.Generator | None = None,
    init: TransceiverDesign | None = None,
    with_dp: bool = True,
) -> tuple:
    """Alternating optimization of the full transceiver; returns (design, trace)."""
    rng = np.random.default_rng(cfg.rng_seed) if rng is None else rng
    m_dev = cfg.num_devices
    phi = phi_constants(cfg) if with_dp else np.zeros(m_dev)

    if init is not None:
        s1, s2 = init.s1.copy(), init.s2.copy()
        f0 = init.f0.copy()
    else:
        s1_mag = np.maximum(rng.uniform(0.0, 1.0, m_dev), 1e-3) * math.sqrt(cfg.max_power)
        s1 = s1_mag.astype(complex)
        s2 = np.sqrt(cfg.max_power - s1_mag**2)
        f0 = channel[:, 0] / np.linalg.norm(channel[:, 0])

    design = None
    best = None
    best_a = math.inf
    trace = PlannerTrace()
    prev_a = None

    for it in range(1, cfg.outer_iters + 1):
        probe = TransceiverDesign(
            s1=s1, s2=s2, eta=1.0, f0=f0,
            extractors=np.tile(f0, (m_dev, 1)),
        )
        extractors = _refresh_extractors(channel, probe, cfg)

        b_dp = _dp_lower_bounds(extractors, channel, cfg, s2, phi)
        b_pow = _power_lower_bounds(cfg, s2)
        sdp = SdpSubproblem(
            channels=channel,
            noise_weights=s2**2,
            tau_weight=cfg.noise_var,
            lower_bounds=np.maximum(b_dp, b_pow),
            penalty=cfg.penalty,
            direction=f0,
        )
        try:
            f_mat, tau, _ = conic.solve_rank_one(sdp, cfg.penalty, cfg.mm_iters, init_direction=f0)
        except conic.NumericalFailure:
            # Keep the best design found so far rather than abandoning the
            # instance over one failed subproblem solve.
            if best is not None:
                break
            raise
        try:
            f0_new, _ = conic.rank_one_factor(f_mat, tau)
        except conic.RankTooHigh:
            # Degenerate geometries (e.g. exactly orthogonal channels) keep the
            # relaxation away from rank one; the principal direction plus the
            # exact eta line search below still yields a feasible design.
            f0_new = conic.principal_eigvec(f_mat)
        f0 = _avoid_degenerate(f0_new, channel, rng)
        # Rank-one extraction is lossy; re-solve the scalar eta line search on the
        # recovered direction so every trace constraint holds exactly.
        gains = np.abs(f0.conj() @ channel) ** 2
        eta = float(np.min(gains / np.maximum(sdp.lower_bounds, 1e-300)))

        if with_dp and np.any(phi > 0):
            lp = LpProblem(
                costs=gains,
                constraint_matrix=np.abs(extractors.conj() @ channel) ** 2,
                rhs=_lp_rhs(extractors, channel, cfg, phi, eta, gains),
                box_upper=cfg.max_power - cfg.device_sizes**2 * cfg.clip_level**2 * eta / gains,
            )
            s2 = np.sqrt(conic.solve_lp(lp))
        else:
            s2 = np.zeros(m_dev)

        s1 = s1_closed_form(eta, f0, channel, cfg)
        # The refreshed extractors see the new scalars and can tighten the DP
        # constraints; restore exact feasibility by shrinking eta and s1 together
        # (alignment-preserving, costs a proportional bump in the noise term).
        for _ in range(5):
            extractors = _refresh_extractors(
                channel, TransceiverDesign(s1=s1, s2=s2, eta=eta, f0=f0, extractors=extractors), cfg
            )
            gamma_sq = _dp_backoff(extractors, channel, cfg, s1, s2, phi)
            if gamma_sq >= 1.0 - 1e-12:
                break
            eta *= gamma_sq
            s1 = s1 * math.sqrt(gamma_sq)
        design = TransceiverDesign(s1=s1, s2=s2, eta=eta, f0=f0, extractors=extractors)

        a_val = noise_term_A(design, channel, cfg)
        residuals = feasibility_check(design, cfg, channel)
        trace.objective_values.append(a_val)
        trace.feasibility_residuals.append(residuals["max_residual"])

        if residuals["max_residual"] <= 1e-6 and a_val < best_a:
            best, best_a = design, a_val
        if prev_a is not None and abs(a_val - prev_a) <= cfg.early_stop_tol:
            trace.early_stop_iteration = it
            break
        prev_a = a_val

    if best is None:
        best = design
    trace.dp = dp_report(best, channel, cfg)
    return best, trace


def _dp_backoff(extractors, channel, cfg, s1, s2, phi):
    """Largest power scale gamma^2 <= 1 making every DP constraint hold exactly."""
    gamma_sq = 1.0
    for m in range(cfg.num_devices):
        if phi[m] == 0.0:
            continue
        proj = extractors[m].conj() @ channel
        noise = float(np.abs(proj) ** 2 @ s2**2 + cfg.noise_var)
        revealed = abs(proj[m]) ** 2 * abs(s1[m]) ** 2 * cfg.rounds * phi[m] / cfg.device_sizes[m] ** 2
        if revealed > noise:
            gamma_sq = min(gamma_sq, noise / revealed)
    return gamma_sq


def _lp_rhs(extractors, channel, cfg, phi, eta, combiner_gains):
    rhs = np.zeros(cfg.num_devices)
    for m in range(cfg.num_devices):
        if phi[m] == 0.0:
            rhs[m] = -cfg.noise_var
            continue
        proj = extractors[m].conj() @ channel
        rhs[m] = (
            abs(proj[m]) ** 2 * cfg.rounds * cfg.clip_level**2 * phi[m] * eta / combiner_gains[m]
            - cfg.noise_var
        )
    return rhs


def _avoid_degenerate(f0: Array, channel: Array, rng: np.random.Generator) -> Array:
    """Nudge the combiner off exact orthogonality with any device channel (3 retries)."""
    for _ in range(3):
        gains = np.abs(f0.conj() @ channel)
        if np.all(gains >= _DEGENERATE_GAIN):
            return f0
        bump = rng.standard_normal(f0.size) + 1j * rng.standard_normal(f0.size)
        f0 = f0 + 1e-6 * bump / np.linalg.norm(bump)
        f0 = f0 / np.linalg.norm(f0)
    gains = np.abs(f0.conj() @ channel)
    if np.all(gains >= _DEGENERATE_GAIN):
        return f0
    raise DegenerateChannel("combiner orthogonal to a device channel after retries")
