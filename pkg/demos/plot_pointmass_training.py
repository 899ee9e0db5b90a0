"""
SAC on PointMass2D with episodic rewards
=========================================

Three ways of turning the end-of-episode return into per-step rewards for the
replay buffer:

* ``sparse``: store the raw emitted reward (zero until the last step),
* ``lrr_gaussian``: store the mean of the learned reward model,
* ``oracle_dense``: store the true per-step reward (not available in practice).

Pass a step budget on the command line, e.g. ``python plot_pointmass_training.py
50000``; the default of 10000 steps runs in about a minute per mode.
"""

import sys

from lrr.config import ExperimentConfig
from lrr.experiment import normalized_score, random_policy_return, run_seed

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000
common = dict(environment="PointMass2D", hidden_units=64, sac_batch_size=128, horizon=200,
              total_env_steps=steps, eval_every=max(steps // 10, 1), relabel_mode="on_sample")

curves = {}
for mode in ("sparse", "lrr_gaussian", "oracle_dense"):
    rec = run_seed(ExperimentConfig(reward_mode=mode, **common), seed=0)
    curves[mode] = rec.evaluations
    print(f"{mode:13s} final return {rec.final_return:8.1f}  ({rec.wall_clock:.0f}s)")

# %%
# Evaluation curves (deterministic policy, 5 fixed start states).
print("\n  step " + "".join(f"{m:>14s}" for m in curves))
for i, (step, *_) in enumerate(curves["sparse"]):
    print(f"{step:6d} " + "".join(f"{curves[m][i][1]:14.1f}" for m in curves))

# %%
# 0 is a uniform-random policy, 1 is the oracle run.
baseline = random_policy_return("PointMass2D", 200, 5)
oracle = curves["oracle_dense"][-1][1]
for mode in ("sparse", "lrr_gaussian"):
    print(f"{mode:13s} normalized score {normalized_score(curves[mode][-1][1], baseline, oracle):.2f}")
