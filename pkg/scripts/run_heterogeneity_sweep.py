#!/usr/bin/env python3
"""Run the regularization-tuning heterogeneity sweep and tabulate cutoffs.

Runs each given experiment config (defaults to the mild and severe
heterogeneity configs in configs/), then reads the resulting manifests
and prints, per topology, the per-trial transient-cutoff iterations and
the fraction of trials in which the sparser ring topology needed at
least as many iterations as the better-connected torus.

Usage:
    python3 scripts/run_heterogeneity_sweep.py [--out DIR] [--trials N] [config.ini ...]
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from gossipbo.cli import run_experiment  # noqa: E402
from gossipbo.config import parse_config  # noqa: E402

DEFAULT_CONFIGS = [
    os.path.join(os.path.dirname(__file__), "..", "configs", f)
    for f in ("ridge_heterogeneity_mild.ini", "ridge_heterogeneity_severe.ini")
]


def run_one(path: str, out_root: str, trials: int | None) -> dict:
    with open(path) as fh:
        config = parse_config(fh.read())
    if trials is not None:
        config.run.n_trials = trials
    label = os.path.splitext(os.path.basename(path))[0]
    out_dir = os.path.join(out_root, label)
    print(f"== {label}: {config.run.n_trials} trial(s), T={config.run.T} -> {out_dir}")
    code = run_experiment(config, out_dir, workers=config.run.workers)
    if code != 0:
        print(f"   warning: exit code {code} (partial results)", file=sys.stderr)
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        return json.load(fh)


def tabulate(label: str, manifest: dict) -> None:
    by_topo: dict[str, dict[int, int]] = {}
    for est in manifest["transient_estimates"]:
        by_topo.setdefault(est["topology"], {})[est["trial"]] = est["cutoff_iteration"]
    print(f"\n{label}: transient cutoff iterations "
          f"(metric={manifest['transient_metric']}, rel_tol={manifest['rel_tol']})")
    for topo, cuts in sorted(by_topo.items()):
        vals = [cuts[t] for t in sorted(cuts)]
        print(f"  {topo:10s} median={statistics.median(vals):>7.0f}  trials={vals}")
    if {"ring", "torus"} <= by_topo.keys():
        trials = sorted(by_topo["ring"])
        wins = sum(by_topo["ring"][t] >= by_topo["torus"][t] for t in trials)
        print(f"  ring cutoff >= torus cutoff in {wins}/{len(trials)} trials")


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("configs", nargs="*", default=None)
    ap.add_argument("--out", default="sweep_out")
    ap.add_argument("--trials", type=int, default=None,
                    help="override n_trials (useful for a quick smoke run)")
    args = ap.parse_args()
    paths = args.configs or DEFAULT_CONFIGS
    manifests = [(os.path.basename(p), run_one(p, args.out, args.trials)) for p in paths]
    for label, manifest in manifests:
        tabulate(label, manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
