"""Over-the-air FL training loop: masked transmission, superposed reception, updates.

Each round every device clips and scales its local gradient, adds its artificial
noise, and all devices transmit simultaneously; the server combines with f0,
normalizes by sqrt(eta), takes the real part, and descends with step 1/omega.
The complex pre-real-part combiner output is kept for the gradient-error
diagnostics so the error decomposition matches the noise/mismatch accounting
exactly (the real-part step only discards noise).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import model
from .model import Array, RidgeDataset, SystemConfig
from .privacy import TransceiverDesign

DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class TrainResult:
    loss_trajectory: Array        # length T+1, starts at F(w0)
    gap_trajectory: Array         # (F(w_t) - F(w*)) / F(w*)
    gradient_error_norms: Array   # length T, complex combiner error per round
    final_w: Array
    diverged: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "loss_trajectory": np.asarray(self.loss_trajectory).tolist(),
                "gap_trajectory": np.asarray(self.gap_trajectory).tolist(),
                "gradient_error_norms": np.asarray(self.gradient_error_norms).tolist(),
                "final_w": np.asarray(self.final_w).tolist(),
                "diverged": self.diverged,
            },
            indent=2,
        )

    def to_csv(self) -> str:
        lines = ["round,loss,gap"]
        for t, (lo, ga) in enumerate(zip(self.loss_trajectory, self.gap_trajectory)):
            lines.append(f"{t},{float(lo)!r},{float(ga)!r}")
        return "\n".join(lines) + "\n"


def transmit_round(
    design: TransceiverDesign,
    grads: Array,
    rng: np.random.Generator,
    cfg: SystemConfig,
    channel: Array,
) -> Array:
    """Superposed received block, N x d: channel-mixed masked gradients plus AWGN."""
    m, d = grads.shape
    art_noise = rng.standard_normal((m, d))
    signals = (design.s1[:, None] / cfg.clip_level) * grads + design.s2[:, None] * art_noise
    block = channel @ signals
    if cfg.noise_var > 0:
        z = rng.standard_normal((channel.shape[0], d)) + 1j * rng.standard_normal((channel.shape[0], d))
        block = block + z * math.sqrt(cfg.noise_var / 2.0)
    return block


def extract(block: Array, f_m: Array) -> Array:
    """Extractor output r_m[i] = f_m^H y[i]."""
    return f_m.conj() @ block


def aggregate(block: Array, f0: Array, eta: float) -> Array:
    """Aggregated gradient estimate Re(f0^H y / sqrt(eta))."""
    return (extract(block, f0) / math.sqrt(eta)).real


def train(
    cfg: SystemConfig,
    channel: Array,
    design: TransceiverDesign,
    ds: RidgeDataset,
    rng: np.random.Generator,
) -> TrainResult:
    """Run T rounds of over-the-air gradient descent from w0 = 0."""
    d = cfg.model_dim
    sizes = cfg.device_sizes
    w = np.zeros(d)
    w_star = model.exact_minimizer(ds)
    f_star = model.loss(ds, w_star)
    lr = cfg.learning_rate
    k = cfg.total_samples

    losses = np.full(cfg.rounds + 1, np.inf)
    gaps = np.full(cfg.rounds + 1, np.inf)
    err_norms = np.full(cfg.rounds, np.inf)
    losses[0] = model.loss(ds, w)
    gaps[0] = (losses[0] - f_star) / f_star
    divergence_cap = DIVERGENCE_FACTOR * losses[0]
    diverged = False

    for t in range(cfg.rounds):
        grads = np.stack(
            [model.local_gradient(ds, m, w, cfg.clip_level) for m in range(cfg.num_devices)]
        )
        block = transmit_round(design, grads, rng, cfg, channel)
        est_complex = extract(block, design.f0) / math.sqrt(design.eta)
        err_norms[t] = np.linalg.norm(sizes @ grads - est_complex) / k
        w = w - (lr / k) * est_complex.real
        losses[t + 1] = model.loss(ds, w)
        gaps[t + 1] = (losses[t + 1] - f_star) / f_star
        if not np.isfinite(losses[t + 1]) or losses[t + 1] > divergence_cap:
            diverged = True
            break

    return TrainResult(
        loss_trajectory=losses,
        gap_trajectory=gaps,
        gradient_error_norms=err_norms,
        final_w=w,
        diverged=diverged,
    )


def normalized_gap(result: TrainResult, ds: RidgeDataset) -> float:
    """(F(w_T) - F(w*)) / F(w*), recomputed from the final iterate."""
    w_star = model.exact_minimizer(ds)
    f_star = model.loss(ds, w_star)
    if f_star <= 0:
        raise ValueError("optimal loss must be positive to normalize the gap")
    return (model.loss(ds, result.final_w) - f_star) / f_star
