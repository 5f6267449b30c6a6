#!/usr/bin/env python3
"""Reproduce the full figure set: run every sweep, summarize, and (optionally) plot.

Writes results/<figure>.csv, results/<figure>_summary.csv, and, when the
frontend is built (cd frontend && npm install && npm run build), the SVG
figures next to them.

Usage: python scripts/run_experiments.py [--trials 500] [--seed 0] [--out results]
"""

import argparse
import pathlib
import subprocess
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from otafl import harness  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results")
    parser.add_argument("--workers", type=int, default=2)
    parser.add_argument("--figures", nargs="*", default=list(harness.FIGURES))
    args = parser.parse_args()

    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    plotter = pathlib.Path(__file__).resolve().parents[1] / "frontend" / "dist" / "plot.js"

    for figure in args.figures:
        rows_path = out_dir / f"{figure}.csv"
        summary_path = out_dir / f"{figure}_summary.csv"
        print(f"[{figure}] running {args.trials} trials ...", flush=True)
        spec = harness.default_spec(
            figure, trials=args.trials, master_seed=args.seed, out_path=str(rows_path)
        )
        text = harness.run_experiment(spec, workers=args.workers)
        summary_path.write_text(harness.aggregate_trials(text))
        print(f"[{figure}] wrote {rows_path} and {summary_path}")
        if plotter.exists():
            image = out_dir / f"{figure}.svg"
            subprocess.run(
                ["node", str(plotter), "--figure", figure,
                 "--in", str(summary_path), "--out", str(image)],
                check=True,
            )
            print(f"[{figure}] wrote {image}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
