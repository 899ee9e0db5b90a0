"""Lag-1 reward autocorrelation with Fisher-z confidence intervals."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .envs import make_env
from .errors import DegenerateInputError, DomainError

Z_95 = 1.959963984540054


@dataclass(frozen=True)
class AutocorrReport:
    environment: str
    rho1: float
    ci_low: float
    ci_high: float
    n: int

    def __post_init__(self):
        if self.n < 4:
            raise DomainError("need n >= 4 for a confidence interval")
        if not self.ci_low <= self.rho1 <= self.ci_high:
            raise ValueError("rho1 outside its own interval")


def _as_episodes(rewards):
    if len(rewards) and np.ndim(rewards[0]) > 0:
        return [np.asarray(ep, dtype=np.float64) for ep in rewards]
    return [np.asarray(rewards, dtype=np.float64)]


def lag1_autocorr(rewards):
    """Lag-1 sample autocorrelation of one sequence or a list of episodes.

    With a list of episodes, the mean and variance pool every reward while the
    lag products only pair rewards from the same episode. Both sums are
    normalized by their own term counts, so a perfectly alternating sequence
    scores exactly -1. Results are clipped to ``[-1, 1]``.
    """
    episodes = _as_episodes(rewards)
    allx = np.concatenate(episodes)
    n_pairs = sum(max(len(ep) - 1, 0) for ep in episodes)
    if len(allx) < 3 or n_pairs < 1:
        raise DomainError("need at least 3 rewards and one within-episode pair")
    mean = allx.mean()
    dev = allx - mean
    var = np.dot(dev, dev) / len(allx)
    if var <= 1e-300 * max(1.0, mean * mean):
        raise DegenerateInputError("rewards have zero variance")
    cov = 0.0
    for ep in episodes:
        d = ep - mean
        cov += np.dot(d[:-1], d[1:])
    rho = (cov / n_pairs) / var
    return float(np.clip(rho, -1.0, 1.0))


def autocorr_ci(rho1, n, z=Z_95):
    """``tanh(atanh(rho1) +- z / sqrt(n - 3))``."""
    if n <= 3:
        raise DomainError(f"n must exceed 3, got {n}")
    if not -1.0 < rho1 < 1.0:
        raise DomainError(f"|rho1| must be < 1, got {rho1}")
    center = np.arctanh(rho1)
    half = z / np.sqrt(n - 3)
    return float(np.tanh(center - half)), float(np.tanh(center + half))


def random_policy_rewards(env_name, episodes, horizon, seed):
    """Inner (dense) rewards of ``episodes`` uniform-random-policy rollouts."""
    env = make_env(env_name, horizon=horizon, episodic=False)
    rng = np.random.default_rng(seed)
    lo = np.asarray(env.spec.action_low)
    hi = np.asarray(env.spec.action_high)
    out = []
    for ep in range(episodes):
        env.reset(int(rng.integers(2**63 - 1)))
        rewards = []
        while True:
            res = env.step(rng.uniform(lo, hi))
            rewards.append(res.reward)
            if res.terminated or res.truncated:
                break
        out.append(np.array(rewards))
    return out


def report(env_name, episodes=20, horizon=200, seed=0):
    rewards = random_policy_rewards(env_name, episodes, horizon, seed)
    n = sum(len(ep) for ep in rewards)
    rho = lag1_autocorr(rewards)
    lo, hi = autocorr_ci(min(max(rho, -1 + 1e-12), 1 - 1e-12), n)
    lo, hi = min(lo, rho), max(hi, rho)
    return AutocorrReport(env_name, rho, lo, hi, n)


def write_reports(path_or_file, reports):
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        writer = csv.writer(fh)
        writer.writerow(["name", "rho1", "ci_low", "ci_high", "n"])
        for r in reports:
            writer.writerow([r.environment, f"{r.rho1:.6f}", f"{r.ci_low:.6f}",
                             f"{r.ci_high:.6f}", r.n])
    finally:
        if own:
            fh.close()
