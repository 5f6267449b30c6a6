"""Scenario configuration, Rayleigh channel draws, and the ridge-regression learning problem."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace

import numpy as np

Array = np.ndarray

# Fields accepted in a SystemConfig JSON document. `snr_db` may be given in
# place of `noise_var` (noise_var = max_power / 10^(snr_db/10)).
_JSON_FIELDS = {
    "num_devices", "num_antennas", "model_dim", "rounds", "samples_per_device",
    "max_power", "noise_var", "snr_db", "clip_level", "dp_epsilon", "dp_delta",
    "strong_convexity", "smoothness", "penalty", "mm_iters", "outer_iters",
    "early_stop_tol", "rng_seed",
}


@dataclass(frozen=True)
class SystemConfig:
    """All scenario constants for one experiment instance."""

    num_devices: int
    num_antennas: int
    model_dim: int
    rounds: int
    samples_per_device: tuple          # K_m, one entry per device
    max_power: float                   # W, per-symbol transmit cap
    noise_var: float                   # sigma_z^2, W per receive antenna
    clip_level: float                  # L, per-sample gradient scale
    dp_epsilon: tuple                  # per-device epsilon target, inf = no DP
    dp_delta: tuple                    # per-device delta, each in (0, 1)
    strong_convexity: float            # mu
    smoothness: float                  # omega, learning rate is 1/omega
    penalty: float = 1.0               # rho, rank-one penalty weight
    mm_iters: int = 50                 # J
    outer_iters: int = 10              # I
    early_stop_tol: float = 1e-4
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "samples_per_device", tuple(int(k) for k in self.samples_per_device))
        object.__setattr__(self, "dp_epsilon", tuple(float(e) for e in self.dp_epsilon))
        object.__setattr__(self, "dp_delta", tuple(float(d) for d in self.dp_delta))
        if min(self.num_devices, self.num_antennas, self.model_dim, self.rounds) < 1:
            raise ValueError("num_devices, num_antennas, model_dim, rounds must all be >= 1")
        if len(self.samples_per_device) != self.num_devices:
            raise ValueError("samples_per_device must have one entry per device")
        if any(k < 1 for k in self.samples_per_device):
            raise ValueError("samples_per_device entries must be positive")
        if not self.max_power > 0:
            raise ValueError("max_power must be positive")
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")
        if not self.clip_level > 0:
            raise ValueError("clip_level must be positive")
        if len(self.dp_epsilon) != self.num_devices or len(self.dp_delta) != self.num_devices:
            raise ValueError("dp_epsilon and dp_delta must have one entry per device")
        if any(e <= 0 for e in self.dp_epsilon):
            raise ValueError("dp_epsilon entries must be positive (inf allowed)")
        if any(not 0 < d < 1 for d in self.dp_delta):
            raise ValueError("dp_delta entries must lie in (0, 1)")
        if not 0 < self.strong_convexity <= self.smoothness:
            raise ValueError("need 0 < strong_convexity <= smoothness")
        if not self.penalty > 0:
            raise ValueError("penalty must be positive")
        if self.mm_iters < 1 or self.outer_iters < 1:
            raise ValueError("mm_iters and outer_iters must be >= 1")
        if not self.early_stop_tol > 0:
            raise ValueError("early_stop_tol must be positive")

    # Short aliases used throughout the math code.
    @property
    def M(self) -> int:
        return self.num_devices

    @property
    def N(self) -> int:
        return self.num_antennas

    @property
    def d(self) -> int:
        return self.model_dim

    @property
    def T(self) -> int:
        return self.rounds

    @property
    def total_samples(self) -> int:
        return int(sum(self.samples_per_device))

    @property
    def device_sizes(self) -> Array:
        return np.asarray(self.samples_per_device, dtype=float)

    @property
    def learning_rate(self) -> float:
        return 1.0 / self.smoothness

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.max_power / self.noise_var)

    def with_updates(self, **kwargs) -> "SystemConfig":
        return replace(self, **kwargs)

    def to_json(self) -> str:
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["samples_per_device"] = list(self.samples_per_device)
        doc["dp_epsilon"] = [e if math.isfinite(e) else "inf" for e in self.dp_epsilon]
        doc["dp_delta"] = list(self.dp_delta)
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SystemConfig":
        doc = json.loads(text)
        unknown = set(doc) - _JSON_FIELDS
        if unknown:
            raise ValueError(f"unknown SystemConfig fields: {sorted(unknown)}")
        if "snr_db" in doc:
            if "noise_var" in doc:
                raise ValueError("give either noise_var or snr_db, not both")
            doc["noise_var"] = doc["max_power"] / 10.0 ** (doc.pop("snr_db") / 10.0)
        if "dp_epsilon" in doc:
            doc["dp_epsilon"] = [float(e) if not isinstance(e, str) else float(e) for e in doc["dp_epsilon"]]
        return cls(**doc)


def noise_var_for_snr_db(max_power: float, snr_db: float) -> float:
    """sigma_z^2 for a target SNR = P_max / sigma_z^2."""
    return max_power / 10.0 ** (snr_db / 10.0)


def generate_channel(cfg: SystemConfig, rng: np.random.Generator) -> Array:
    """Draw the N x M uplink channel, entries i.i.d. CN(0, 1)."""
    shape = (cfg.num_antennas, cfg.num_devices)
    h = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return h / np.sqrt(2.0)


def equal_partition(total: int, parts: int) -> tuple:
    """Equal split of `total` samples over `parts` devices; rejects uneven splits."""
    if total % parts != 0:
        raise ValueError(f"{total} samples cannot be split equally over {parts} devices")
    return tuple([total // parts] * parts)


@dataclass(frozen=True)
class RidgeDataset:
    """Synthetic regression data with a per-device partition and exact minimizer available."""

    inputs: Array                      # K x d
    outputs: Array                     # K
    partition: tuple                   # per-device (start, stop) row ranges
    reg_coefficient: float             # ridge regularizer, not the DP constant
    w_true: Array

    def __post_init__(self):
        if not self.reg_coefficient > 0:
            raise ValueError("reg_coefficient must be positive")
        stops = [r[1] for r in self.partition]
        starts = [r[0] for r in self.partition]
        if starts[0] != 0 or stops[-1] != self.inputs.shape[0] or any(
            s != e for s, e in zip(stops[:-1], starts[1:])
        ):
            raise ValueError("partition must be a disjoint cover of the sample rows")

    @property
    def num_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def device_rows(self, m: int) -> tuple:
        return self.partition[m]


def generate_ridge_dataset(
    cfg: SystemConfig,
    reg_coefficient: float,
    rng: np.random.Generator,
    noise_var: float = 0.2,
) -> RidgeDataset:
    """Standard-normal inputs and true model, outputs v_k = w_true.u_k + noise."""
    total = cfg.total_samples
    d = cfg.model_dim
    inputs = rng.standard_normal((total, d))
    w_true = rng.standard_normal(d)
    noise = rng.standard_normal(total) * math.sqrt(noise_var) if noise_var > 0 else 0.0
    outputs = inputs @ w_true + noise
    bounds = np.cumsum((0,) + cfg.samples_per_device)
    partition = tuple((int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]))
    return RidgeDataset(inputs, outputs, partition, float(reg_coefficient), w_true)


def loss(ds: RidgeDataset, w: Array) -> float:
    """F(w) = (1/2K) sum (v_k - w.u_k)^2 + (phi/2) ||w||^2."""
    resid = ds.outputs - ds.inputs @ w
    k = ds.num_samples
    return float(resid @ resid / (2.0 * k) + 0.5 * ds.reg_coefficient * (w @ w))


def loss_gradient(ds: RidgeDataset, w: Array) -> Array:
    resid = ds.inputs @ w - ds.outputs
    return ds.inputs.T @ resid / ds.num_samples + ds.reg_coefficient * w


def exact_minimizer(ds: RidgeDataset) -> Array:
    """Closed-form argmin of `loss`: (U^T U + K phi I)^-1 U^T v."""
    k = ds.num_samples
    gram = ds.inputs.T @ ds.inputs + k * ds.reg_coefficient * np.eye(ds.dim)
    return np.linalg.solve(gram, ds.inputs.T @ ds.outputs)


def strong_convexity_params(ds: RidgeDataset) -> tuple:
    """(mu, omega): extreme eigenvalues of the loss Hessian (1/K) U^T U + phi I."""
    hess = ds.inputs.T @ ds.inputs / ds.num_samples + ds.reg_coefficient * np.eye(ds.dim)
    eigs = np.linalg.eigvalsh(hess)
    return float(eigs[0]), float(eigs[-1])


def per_sample_gradients(ds: RidgeDataset, m: int, w: Array) -> Array:
    """Rows are per-sample gradients of f, regularizer included so device sums match K grad F."""
    a, b = ds.device_rows(m)
    u = ds.inputs[a:b]
    resid = u @ w - ds.outputs[a:b]
    return resid[:, None] * u + ds.reg_coefficient * w


def clip_rows(grads: Array, clip_scale: float) -> Array:
    """Shrink each row to norm at most clip_scale (g <- g / max{1, ||g|| / clip_scale})."""
    norms = np.linalg.norm(grads, axis=1)
    factors = np.maximum(1.0, norms / clip_scale)
    return grads / factors[:, None]


def local_gradient(ds: RidgeDataset, m: int, w: Array, clip_level: float) -> Array:
    """Device-m gradient: per-sample gradients clipped at sqrt(d) L, then averaged."""
    grads = per_sample_gradients(ds, m, w)
    clip_scale = math.sqrt(ds.dim) * clip_level
    return clip_rows(grads, clip_scale).mean(axis=0)
