"""Seed-averaged learning curves for the two selector walks.

The default walk keeps its forced-exploration schedule independent of the
submitted bids, which is what makes the allocation exactly monotone (and the
composed mechanism truthful), but it keeps exploring on most rounds at this
horizon.  The opt-in gated walk concentrates exploration on surviving
candidates and reproduces the steeply declining per-round regret familiar
from staged-bandit plots, at the price of coupling learning to bids.

Writes six SVG panels under out/demo_curves/.
"""
import os
from dataclasses import replace

import numpy as np

from trcm.harness import ExperimentConfig, run_experiment

OUT = "out/demo_curves"
os.makedirs(OUT, exist_ok=True)

for label, gated in (("monotone", False), ("gated", True)):
    config = ExperimentConfig(
        rounds=4000,
        seeds=10,
        providers=4,
        dim=5,
        mu=0.05,
        alpha=0.75,
        base_seed=0,
        out_dir=os.path.join(OUT, label),
        gated_exploration=gated,
    )
    result = run_experiment(config)
    t = config.rounds
    cum = result.mean_cum_regret
    ratio = cum[-1] / cum[t // 2 - 1]
    decline = (
        result.mean_round_regret[-t // 10 :].mean()
        / result.mean_round_regret[: t // 10].mean()
    )
    print(
        f"{label:9s} walk: total regret {cum[-1]:8.1f}   "
        f"R_T/R_T2 {ratio:.3f}   final/first decile {decline:.3f}   "
        f"-> {config.out_dir}/"
    )

print(
    "\nThe gated curves bend toward the sqrt(t) guide; the monotone curves "
    "stay exploration-dominated at this horizon. That trade is deliberate: "
    "only the monotone walk passes the exact paired-bid monotonicity audit "
    "(see demo 04 and notes in the README)."
)
