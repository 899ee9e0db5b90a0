"""
Fitting a per-step reward model to episodic returns
=====================================================

A toy problem where the true per-step reward is known: ``r(s, a) = s - a``
with scalar state and action. Each trajectory only reveals its summed return.
The Gaussian reward model is fitted with the leave-one-out likelihood and its
mean head is compared with the hidden reward.
"""

import numpy as np

from lrr.reward_model import Family, RewardModel, Trajectory, predict_params, train_step
from lrr.theory import optimal_sigma_gaussian, optimal_sigma_skew

rng = np.random.default_rng(0)


def make_trajectory(T=10):
    s = rng.uniform(-1, 1, size=(T, 1))
    a = rng.uniform(-1, 1, size=(T, 1))
    return Trajectory(s, a, float(np.sum(s - a)))


data = [make_trajectory() for _ in range(200)]

# %%
# Train. Each step samples 8 trajectories and fresh leave-one-out noise.
model = RewardModel.create(Family.GAUSSIAN, 1, 1, hidden_sizes=(32, 32), rng=rng)
for step in range(3001):
    batch = [data[i] for i in rng.integers(0, len(data), 8)]
    loss = train_step(model, batch, 1e-3, rng)
    if step % 500 == 0:
        print(f"step {step:5d}  loss {loss:8.4f}  mean sigma {model.last_stats['mean_sigma']:.3f}")

# %%
# The mean head should now track s - a on fresh inputs.
s = np.linspace(-1, 1, 5)[:, None]
a = np.zeros_like(s)
params = predict_params(model, s, a)
print("\n   s     true r    mu      sigma")
for si, mu, sig in zip(s[:, 0], params.mu, params.sigma):
    print(f"{si:5.2f}  {si:8.3f}  {mu:7.3f}  {sig:7.3f}")

# %%
# For a fixed residual delta the Gaussian loss log(sigma) + delta^2 / (2 sigma^2)
# is minimized at sigma = |delta|; a skew-normal head shrinks sigma when its
# shape parameter agrees with the sign of the residual and widens it otherwise.
print("\ndelta  gaussian  skew(lam=+2)  skew(lam=-2)")
for delta in (0.5, 1.0, 2.0):
    print(f"{delta:5.1f}  {optimal_sigma_gaussian(delta):8.3f}  "
          f"{optimal_sigma_skew(delta, 2.0):12.3f}  {optimal_sigma_skew(delta, -2.0):12.3f}")
