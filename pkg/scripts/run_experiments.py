#!/usr/bin/env python3
"""Run the randomized approximation / monotonicity sweeps and write their summaries.

Usage: python scripts/run_experiments.py [--trials N] [--seed S] [--workers W] [--out results.json]
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import time

from capmatch.experiment import ExperimentConfig, run_experiment, summarize

DEFAULTS = [
    ExperimentConfig("random-general", trials=1000, seed=0, max_agents=7, max_positions=4),
    ExperimentConfig("random-position", trials=500, seed=0, max_agents=6, max_positions=4),
]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, help="override the trial count of every sweep")
    parser.add_argument("--seed", type=int, help="override the base seed")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", help="write all summaries to this JSON file")
    args = parser.parse_args(argv)

    summaries = []
    for config in DEFAULTS:
        overrides = {"workers": args.workers}
        if args.trials is not None:
            overrides["trials"] = args.trials
        if args.seed is not None:
            overrides["seed"] = args.seed
        config = dataclasses.replace(config, **overrides)
        start = time.perf_counter()
        summary = summarize(config, run_experiment(config))
        summary["wall_time"] = round(time.perf_counter() - start, 3)
        summaries.append(summary)
        print(f"{config.family}: {config.trials} trials, {summary['total_violations']} violations "
              f"({summary['wall_time']}s)")
        for rule, stats in summary["ratios"].items():
            print(f"  {rule:<15} min {stats['min']}  median {stats['median']}  max {stats['max']}")
        for key, count in summary["violations"].items():
            print(f"  {key:<20} {count}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(summaries, fh, indent=2)
    return 1 if any(s["total_violations"] for s in summaries) else 0


if __name__ == "__main__":
    raise SystemExit(main())
