"""Experiment orchestration: seeded Monte Carlo sweeps, scheme comparisons, CSV output.

Seeding: the master seed plus a counter key (figure, purpose, sweep index,
trial, scheme) drives every random draw through numpy SeedSequence spawns.
The physical scenario (channel, dataset) and the optimizer initialization are
keyed without the scheme so schemes are compared on identical instances;
training noise and the random-extractor draws are scheme-keyed.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import airsim, miso, model, planner, privacy
from .conic import Infeasible, NumericalFailure
from .model import SystemConfig
from .planner import DegenerateChannel

# A failed optimization is recorded as an infeasible row, never dropped.
_DESIGN_FAILURES = (Infeasible, DegenerateChannel, NumericalFailure)

CSV_HEADER = "trial,scheme,sweep_name,sweep_value,gap,eps_bs_mean,feasible,seed"
SUMMARY_HEADER = "scheme,sweep_name,sweep_value,n_trials,n_feasible,gap_mean,gap_se,eps_mean,eps_se"

FIGURES = ("extractors", "gap_vs_epsilon", "gap_vs_snr", "gap_vs_T", "gap_vs_N")
SCHEMES = ("mimo_dp", "miso_dp", "mimo_nodp", "miso_nodp")
EXTRACTOR_SCHEMES = ("mmse", "f0_combiner", "random")

_FIGURE_ID = {name: i for i, name in enumerate(FIGURES)}
_SCHEME_ID = {name: i for i, name in enumerate(SCHEMES + EXTRACTOR_SCHEMES)}

# Purposes for the seed counter.
_SCENARIO, _DESIGN, _TRAIN, _MISC = 0, 1, 2, 3

REG_COEFFICIENT = 1e-3
DATA_NOISE_VAR = 0.2

DEFAULT_EPSILON_SWEEP = (1.0, 5.0, 10.0, 20.0, 30.0, 40.0, 60.0)
DEFAULT_SNR_SWEEP = (0.0, 10.0, 20.0, 30.0, 40.0)
DEFAULT_ROUNDS_SWEEP = (10, 20, 30, 40, 50, 60, 80, 100)
DEFAULT_ANTENNA_SWEEP = (1, 2, 4, 8, 16, 20, 32)


def base_config(
    snr_db: float = 15.0,
    epsilon: float = 30.0,
    rounds: int = 30,
    num_antennas: int = 20,
    clip_level: float = 5.0,
    rng_seed: int = 0,
) -> SystemConfig:
    """Standard synthetic-ridge scenario: 10 devices, 1000 samples, 20 parameters.

    The clip level keeps sqrt(d) L above the bulk of the per-sample gradient
    norms, so the convexity-based accounting stays faithful to the simulated
    dynamics; mu/omega placeholders are overwritten per realized dataset.
    """
    m = 10
    return SystemConfig(
        num_devices=m,
        num_antennas=num_antennas,
        model_dim=20,
        rounds=rounds,
        samples_per_device=model.equal_partition(1000, m),
        max_power=1.0,
        noise_var=model.noise_var_for_snr_db(1.0, snr_db),
        clip_level=clip_level,
        dp_epsilon=(epsilon,) * m,
        dp_delta=(1e-3,) * m,
        strong_convexity=0.5,
        smoothness=1.5,
        rng_seed=rng_seed,
    )


@dataclass(frozen=True)
class ExperimentSpec:
    figure_id: str
    schemes: tuple
    sweep_name: str
    sweep_values: tuple
    trials: int
    base: SystemConfig
    master_seed: int
    out_path: str | None = None

    def __post_init__(self):
        if self.figure_id not in FIGURES:
            raise ValueError(f"unknown figure id {self.figure_id!r}")
        if not self.sweep_values:
            raise ValueError("sweep must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class ResultRow:
    trial: int
    scheme: str
    sweep_name: str
    sweep_value: float
    gap: float
    eps_bs_mean: float
    feasible: bool
    seed: int

    def to_csv_line(self) -> str:
        return ",".join(
            [
                str(self.trial),
                self.scheme,
                self.sweep_name,
                repr(float(self.sweep_value)),
                repr(float(self.gap)),
                repr(float(self.eps_bs_mean)),
                "true" if self.feasible else "false",
                str(self.seed),
            ]
        )


def default_spec(
    figure_id: str,
    trials: int = 500,
    master_seed: int = 0,
    base: SystemConfig | None = None,
    out_path: str | None = None,
) -> ExperimentSpec:
    base = base_config() if base is None else base
    if figure_id == "extractors":
        schemes, sweep_name, values = EXTRACTOR_SCHEMES, "epsilon", DEFAULT_EPSILON_SWEEP
    elif figure_id == "gap_vs_epsilon":
        schemes, sweep_name, values = SCHEMES, "epsilon", DEFAULT_EPSILON_SWEEP
    elif figure_id == "gap_vs_snr":
        schemes, sweep_name, values = SCHEMES, "snr_db", DEFAULT_SNR_SWEEP
    elif figure_id == "gap_vs_T":
        schemes, sweep_name, values = ("mimo_dp", "mimo_nodp"), "rounds", DEFAULT_ROUNDS_SWEEP
    elif figure_id == "gap_vs_N":
        schemes, sweep_name, values = ("mimo_dp",), "num_antennas", DEFAULT_ANTENNA_SWEEP
    else:
        raise ValueError(f"unknown figure id {figure_id!r}")
    return ExperimentSpec(
        figure_id=figure_id, schemes=schemes, sweep_name=sweep_name,
        sweep_values=tuple(values), trials=trials, base=base,
        master_seed=master_seed, out_path=out_path,
    )


def _stream(spec: ExperimentSpec, purpose: int, sweep_idx: int, trial: int, scheme: str = ""):
    scheme_id = _SCHEME_ID[scheme] + 1 if scheme else 0
    key = (_FIGURE_ID[spec.figure_id], purpose, sweep_idx, trial, scheme_id)
    ss = np.random.SeedSequence(entropy=spec.master_seed, spawn_key=key)
    return np.random.default_rng(ss), int(ss.generate_state(1, dtype=np.uint64)[0])


def _scenario_stream(spec: ExperimentSpec, trial: int):
    # Channel and dataset are shared across sweep points and schemes (paired
    # comparison on identical instances), so the scenario key drops both.
    return _stream(spec, _SCENARIO, 0, trial)


def _channel_draw_antennas(spec: ExperimentSpec) -> int:
    if spec.sweep_name == "num_antennas":
        return int(max(spec.sweep_values))
    return spec.base.num_antennas


def _effective_config(spec: ExperimentSpec, scheme: str, sweep_value, mu: float, omega: float) -> SystemConfig:
    cfg = spec.base
    updates = {"strong_convexity": mu, "smoothness": omega}
    if spec.sweep_name == "epsilon" and scheme not in ("mimo_nodp", "miso_nodp"):
        updates["dp_epsilon"] = (float(sweep_value),) * cfg.num_devices
    elif spec.sweep_name == "snr_db":
        updates["noise_var"] = model.noise_var_for_snr_db(cfg.max_power, float(sweep_value))
    elif spec.sweep_name == "rounds":
        updates["rounds"] = int(sweep_value)
    elif spec.sweep_name == "num_antennas":
        updates["num_antennas"] = int(sweep_value)
    if scheme in ("mimo_nodp", "miso_nodp"):
        updates["dp_epsilon"] = (math.inf,) * cfg.num_devices
    if scheme.startswith("miso"):
        updates["num_antennas"] = 1
    return cfg.with_updates(**updates)


def _design_for(cfg: SystemConfig, channel, scheme: str, design_rng):
    if scheme.startswith("miso"):
        sol = miso.miso_optimal_design(cfg, channel)
        return sol.design
    design, _ = planner.optimize_transceivers(
        cfg, channel, rng=design_rng, with_dp=(scheme == "mimo_dp")
    )
    return design


def _run_cell(spec: ExperimentSpec, sweep_idx: int, trial: int) -> list:
    """All rows for one (sweep point, trial): shared scenario, per-scheme designs."""
    sweep_value = spec.sweep_values[sweep_idx]
    scenario_rng, _ = _scenario_stream(spec, trial)
    draw_cfg = spec.base.with_updates(num_antennas=_channel_draw_antennas(spec))
    master_channel = model.generate_channel(draw_cfg, scenario_rng)
    ds = model.generate_ridge_dataset(spec.base, REG_COEFFICIENT, scenario_rng, DATA_NOISE_VAR)
    mu, omega = model.strong_convexity_params(ds)

    if spec.figure_id == "extractors":
        return _run_extractor_cell(spec, sweep_idx, trial, sweep_value, master_channel, ds, mu, omega)

    rows = []
    for scheme in spec.schemes:
        cfg = _effective_config(spec, scheme, sweep_value, mu, omega)
        channel = master_channel[: cfg.num_antennas, :]
        design_rng, _ = _stream(spec, _DESIGN, sweep_idx, trial)
        train_rng, row_seed = _stream(spec, _TRAIN, sweep_idx, trial, scheme)
        try:
            design = _design_for(cfg, channel, scheme, design_rng)
        except _DESIGN_FAILURES:
            rows.append(ResultRow(trial, scheme, spec.sweep_name, sweep_value,
                                  math.nan, math.nan, False, row_seed))
            continue
        result = airsim.train(cfg, channel, design, ds, train_rng)
        gap = airsim.normalized_gap(result, ds)
        report = privacy.dp_report(design, channel, cfg)
        rows.append(ResultRow(trial, scheme, spec.sweep_name, sweep_value, gap,
                              float(report.eps_bs.mean()), bool(report.feasible.all()), row_seed))
    return rows


def _run_extractor_cell(spec, sweep_idx, trial, sweep_value, master_channel, ds, mu, omega):
    """Extractor comparison: one optimized design, three server-side extraction rules."""
    cfg = _effective_config(spec, "mimo_dp", sweep_value, mu, omega)
    channel = master_channel[: cfg.num_antennas, :]
    design_rng, _ = _stream(spec, _DESIGN, sweep_idx, trial)
    rows = []
    try:
        design = _design_for(cfg, channel, "mimo_dp", design_rng)
    except _DESIGN_FAILURES:
        for scheme in spec.schemes:
            _, row_seed = _stream(spec, _TRAIN, sweep_idx, trial, scheme)
            rows.append(ResultRow(trial, scheme, spec.sweep_name, sweep_value,
                                  math.nan, math.nan, False, row_seed))
        return rows

    train_rng, _ = _stream(spec, _TRAIN, sweep_idx, trial)
    result = airsim.train(cfg, channel, design, ds, train_rng)
    gap = airsim.normalized_gap(result, ds)

    misc_rng, _ = _stream(spec, _MISC, sweep_idx, trial)
    for scheme in spec.schemes:
        _, row_seed = _stream(spec, _TRAIN, sweep_idx, trial, scheme)
        if scheme == "mmse":
            extractors = design.extractors
        elif scheme == "f0_combiner":
            extractors = np.tile(design.f0, (cfg.num_devices, 1))
        elif scheme == "random":
            draw = misc_rng.normal(scale=1.0 / math.sqrt(cfg.num_antennas),
                                   size=(cfg.num_devices, cfg.num_antennas))
            extractors = draw / np.linalg.norm(draw, axis=1, keepdims=True)
        else:
            raise ValueError(f"unknown extractor scheme {scheme!r}")
        variant = replace(design, extractors=np.asarray(extractors, dtype=complex))
        report = privacy.dp_report(variant, channel, cfg)
        rows.append(ResultRow(trial, scheme, spec.sweep_name, sweep_value, gap,
                              float(report.eps_bs.mean()), bool(report.feasible.all()), row_seed))
    return rows


def _run_nested_rounds(spec: ExperimentSpec, trial: int) -> list:
    """T-sweep rows for a round-independent design, read off one long trajectory."""
    scheme = "mimo_nodp"
    t_max = int(max(spec.sweep_values))
    scenario_rng, _ = _scenario_stream(spec, trial)
    draw_cfg = spec.base.with_updates(num_antennas=_channel_draw_antennas(spec))
    channel = model.generate_channel(draw_cfg, scenario_rng)[: spec.base.num_antennas, :]
    ds = model.generate_ridge_dataset(spec.base, REG_COEFFICIENT, scenario_rng, DATA_NOISE_VAR)
    mu, omega = model.strong_convexity_params(ds)

    cfg_max = _effective_config(spec, scheme, t_max, mu, omega)
    design_rng, _ = _stream(spec, _DESIGN, 0, trial)
    train_rng, row_seed = _stream(spec, _TRAIN, 0, trial, scheme)
    try:
        design = _design_for(cfg_max, channel, scheme, design_rng)
    except _DESIGN_FAILURES:
        return [
            ResultRow(trial, scheme, spec.sweep_name, t, math.nan, math.nan, False, row_seed)
            for t in spec.sweep_values
        ]
    result = airsim.train(cfg_max, channel, design, ds, train_rng)

    rows = []
    for t in spec.sweep_values:
        cfg_t = _effective_config(spec, scheme, t, mu, omega)
        report = privacy.dp_report(design, channel, cfg_t)
        gap = float(result.gap_trajectory[int(t)])
        rows.append(ResultRow(trial, scheme, spec.sweep_name, t, gap,
                              float(report.eps_bs.mean()), bool(report.feasible.all()), row_seed))
    return rows


def _cell_worker(args):
    return _run_cell(*args)


def _nested_worker(args):
    return _run_nested_rounds(*args)


def run_experiment(spec: ExperimentSpec, workers: int = 0) -> str:
    """Run every (scheme, sweep point, trial) and return the CSV text; writes out_path if set."""
    nested_rounds = spec.figure_id == "gap_vs_T" and "mimo_nodp" in spec.schemes
    cell_spec = spec
    if nested_rounds:
        cell_spec = replace(spec, schemes=tuple(s for s in spec.schemes if s != "mimo_nodp"))

    tasks = [
        (cell_spec, sweep_idx, trial)
        for sweep_idx in range(len(spec.sweep_values))
        for trial in range(spec.trials)
    ]
    nested_tasks = [(spec, trial) for trial in range(spec.trials)] if nested_rounds else []

    rows: list = []
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            if cell_spec.schemes:
                for batch in pool.map(_cell_worker, tasks, chunksize=4):
                    rows.extend(batch)
            for batch in pool.map(_nested_worker, nested_tasks, chunksize=4):
                rows.extend(batch)
    else:
        if cell_spec.schemes:
            for task in tasks:
                rows.extend(_cell_worker(task))
        for task in nested_tasks:
            rows.extend(_nested_worker(task))

    rows.sort(key=lambda r: (r.scheme, r.sweep_name, r.sweep_value, r.trial))
    text = CSV_HEADER + "\n" + "\n".join(r.to_csv_line() for r in rows) + "\n"
    if spec.out_path:
        with open(spec.out_path, "w") as fh:
            fh.write(text)
    return text


def read_result_csv(text: str) -> list:
    """Parse a results CSV back into ResultRow objects; rejects schema drift."""
    lines = text.strip().split("\n")
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"bad results schema; expected header {CSV_HEADER!r}")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 8:
            raise ValueError(f"bad results row: {line!r}")
        rows.append(
            ResultRow(
                trial=int(parts[0]), scheme=parts[1], sweep_name=parts[2],
                sweep_value=float(parts[3]), gap=float(parts[4]),
                eps_bs_mean=float(parts[5]), feasible=parts[6] == "true",
                seed=int(parts[7]),
            )
        )
    return rows


def aggregate_trials(text: str) -> str:
    """Per (scheme, sweep point): mean, standard error, and counts over feasible trials."""
    rows = read_result_csv(text)
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.scheme, r.sweep_name, r.sweep_value), []).append(r)

    def mean_se(values):
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            return math.nan, math.nan
        if arr.size == 1:
            return float(arr[0]), 0.0
        return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))

    out = [SUMMARY_HEADER]
    for key in sorted(groups):
        scheme, sweep_name, sweep_value = key
        cells = groups[key]
        feasible = [r for r in cells if r.feasible and math.isfinite(r.gap)]
        gap_mean, gap_se = mean_se([r.gap for r in feasible])
        eps_mean, eps_se = mean_se([r.eps_bs_mean for r in feasible])
        out.append(
            ",".join(
                [
                    scheme, sweep_name, repr(float(sweep_value)),
                    str(len(cells)), str(len(feasible)),
                    repr(gap_mean), repr(gap_se), repr(eps_mean), repr(eps_se),
                ]
            )
        )
    return "\n".join(out) + "\n"


def summarize_file(in_path: str, out_path: str) -> None:
    with open(in_path) as fh:
        text = fh.read()
    summary = aggregate_trials(text)
    with open(out_path, "w") as fh:
        fh.write(summary)
