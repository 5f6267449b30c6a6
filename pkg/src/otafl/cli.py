"""Command-line entry points: optimize, train, experiment, summarize.

Exit codes: 0 success, 2 when an experiment produced only infeasible rows,
1 on any error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import airsim, harness, model, planner, privacy
from .model import SystemConfig


def _cmd_optimize(args) -> int:
    with open(args.config) as fh:
        cfg = SystemConfig.from_json(fh.read())
    rng = np.random.default_rng(np.random.SeedSequence(cfg.rng_seed))
    channel = model.generate_channel(cfg, rng)
    design, trace = planner.optimize_transceivers(
        cfg, channel, rng=rng, with_dp=not args.no_dp
    )
    doc = {
        "config": json.loads(cfg.to_json()),
        "channel_real": channel.real.tolist(),
        "channel_imag": channel.imag.tolist(),
        "design": json.loads(design.to_json()),
        "trace": json.loads(trace.to_json()),
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
    return 0


def _cmd_train(args) -> int:
    with open(args.config) as fh:
        cfg = SystemConfig.from_json(fh.read())
    with open(args.design) as fh:
        doc = json.load(fh)
    channel = np.asarray(doc["channel_real"]) + 1j * np.asarray(doc["channel_imag"])
    design = privacy.TransceiverDesign.from_json(json.dumps(doc["design"]))
    scen_rng = np.random.default_rng(np.random.SeedSequence(cfg.rng_seed, spawn_key=(1,)))
    ds = model.generate_ridge_dataset(cfg, harness.REG_COEFFICIENT, scen_rng, harness.DATA_NOISE_VAR)
    mu, omega = model.strong_convexity_params(ds)
    cfg = cfg.with_updates(strong_convexity=mu, smoothness=omega)
    train_rng = np.random.default_rng(np.random.SeedSequence(cfg.rng_seed, spawn_key=(2,)))
    result = airsim.train(cfg, channel, design, ds, train_rng)
    out = {
        "result": json.loads(result.to_json()),
        "normalized_gap": airsim.normalized_gap(result, ds),
    }
    with open(args.out, "w") as fh:
        json.dump(out, fh, indent=2)
    return 0


def _cmd_experiment(args) -> int:
    base = harness.base_config()
    if args.config:
        with open(args.config) as fh:
            base = SystemConfig.from_json(fh.read())
    spec = harness.default_spec(
        args.figure, trials=args.trials, master_seed=args.seed, base=base, out_path=args.out
    )
    text = harness.run_experiment(spec, workers=args.workers)
    rows = harness.read_result_csv(text)
    if rows and all(not r.feasible for r in rows):
        return 2
    return 0


def _cmd_summarize(args) -> int:
    harness.summarize_file(args.infile, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otafl",
        description="Differentially private over-the-air federated learning toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run the transceiver optimizer on one instance")
    p_opt.add_argument("--config", required=True)
    p_opt.add_argument("--out", required=True)
    p_opt.add_argument("--no-dp", action="store_true", help="drop the privacy constraints")
    p_opt.set_defaults(func=_cmd_optimize)

    p_train = sub.add_parser("train", help="simulate FL training with a stored design")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--design", required=True)
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(func=_cmd_train)

    p_exp = sub.add_parser("experiment", help="run a Monte Carlo sweep")
    p_exp.add_argument("--figure", required=True, choices=harness.FIGURES)
    p_exp.add_argument("--trials", type=int, default=500)
    p_exp.add_argument("--seed", type=int, default=0)
    p_exp.add_argument("--out", required=True)
    p_exp.add_argument("--config", default=None, help="base SystemConfig JSON (optional)")
    p_exp.add_argument("--workers", type=int, default=0)
    p_exp.set_defaults(func=_cmd_experiment)

    p_sum = sub.add_parser("summarize", help="aggregate a results CSV")
    p_sum.add_argument("--in", dest="infile", required=True)
    p_sum.add_argument("--out", required=True)
    p_sum.set_defaults(func=_cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a clean diagnostic, reserve 1 for errors
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
