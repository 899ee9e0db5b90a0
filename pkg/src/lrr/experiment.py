"""Training loop: collect, fit the reward model, relabel, update SAC.

Seeding: every run derives independent generators from its master seed with
``SeedSequence([seed, crc32(stream_name)])``, one per named stream (see
``STREAMS``), so switching a component on or off never shifts another
component's random numbers.
"""

from __future__ import annotations

import csv
import io
import time
import zlib
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .config import ExperimentConfig, config_hash, dump_config
from .envs import make_env, write_trajectory_dump
from .reward_model import (LOSS_CURVE_COLUMNS, Family, RewardModel, dumps_model,
                           redistribute, train_step)
from .sac import Episode, ReplayBuffer, SacAgent, relabel_and_store, sac_update, select_action

STREAMS = ("init", "env", "explore", "sac", "buffer", "reward_noise", "reward_batch")
EVAL_SEED_BASE = 10_000_019
EVAL_COLUMNS = ("step", "mean_return", "std_return", "seed")

_MODEL_FAMILY = {"lrr_gaussian": Family.GAUSSIAN, "lrr_skew": Family.SKEW_NORMAL,
                 "mse_rd": Family.FIXED_SIGMA_MSE}
_STORE_MODE = {"lrr_gaussian": "lrr", "lrr_skew": "lrr", "mse_rd": "lrr",
               "sparse": "sparse", "oracle_dense": "oracle"}


def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


@dataclass
class RunRecord:
    config_hash: str
    seed: int
    evaluations: list = field(default_factory=list)  # (step, mean_return, std_return)
    loss_curve: list = field(default_factory=list)  # LOSS_CURVE_COLUMNS rows
    wall_clock: float = 0.0
    output_dir: Path | None = None

    @property
    def final_return(self):
        return self.evaluations[-1][1] if self.evaluations else float("nan")

    def eval_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EVAL_COLUMNS)
        for step, mean, std in self.evaluations:
            w.writerow([step, repr(mean), repr(std), self.seed])
        return buf.getvalue()

    def loss_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOSS_CURVE_COLUMNS)
        for row in self.loss_curve:
            w.writerow([row[0], *map(repr, row[1:])])
        return buf.getvalue()


def evaluate(agent: SacAgent, env_name, horizon, episodes):
    """Mean and std of the summed dense reward over deterministic rollouts."""
    env = make_env(env_name, horizon=horizon, episodic=False)
    returns = []
    for e in range(episodes):
        s = env.reset(EVAL_SEED_BASE + e)
        total = 0.0
        while True:
            res = env.step(select_action(agent, s, deterministic=True))
            total += res.reward
            s = res.next_state
            if res.terminated or res.truncated:
                break
        returns.append(total)
    return float(np.mean(returns)), float(np.std(returns))


def random_policy_return(env_name, horizon, episodes, repeats=20, seed=0):
    """Mean dense return of uniform-random actions from the evaluation start states.

    The reference point for :func:`normalized_score`; each of the ``episodes``
    evaluation starts is rolled out ``repeats`` times.
    """
    env = make_env(env_name, horizon=horizon, episodic=False)
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(env.spec.action_low), np.asarray(env.spec.action_high)
    returns = []
    for _ in range(repeats):
        for e in range(episodes):
            env.reset(EVAL_SEED_BASE + e)
            total = 0.0
            while True:
                res = env.step(rng.uniform(lo, hi))
                total += res.reward
                if res.terminated or res.truncated:
                    break
            returns.append(total)
    return float(np.mean(returns))


def normalized_score(ret, baseline, reference):
    """``(ret - baseline) / (reference - baseline)``: 0 at the baseline, 1 at the reference."""
    if reference == baseline:
        raise ValueError("reference and baseline returns coincide")
    return (ret - baseline) / (reference - baseline)


def dumps_agent(agent: SacAgent, env_name, horizon) -> str:
    low = agent.action_center - agent.action_scale
    high = agent.action_center + agent.action_scale
    return ("sac_policy 1\n"
            f"environment {env_name}\n"
            f"horizon {horizon}\n"
            f"action_low {' '.join(repr(float(v)) for v in low)}\n"
            f"action_high {' '.join(repr(float(v)) for v in high)}\n"
            + nn.dumps_net(agent.policy.net))


def loads_agent(text: str):
    """Rebuild an agent (policy only) from :func:`dumps_agent` output.

    Returns ``(agent, environment_name, horizon)``.
    """
    lines = text.splitlines()
    if lines[:1] != ["sac_policy 1"]:
        raise ValueError("not a sac_policy checkpoint")
    env_name = lines[1].split()[1]
    horizon = int(lines[2].split()[1])
    low = [float(v) for v in lines[3].split()[1:]]
    high = [float(v) for v in lines[4].split()[1:]]
    policy = nn.loads_net("\n".join(lines[5:]))
    state_dim, action_dim = policy.n_in, policy.n_out // 2
    hidden = policy.layer_sizes[1:-1]
    agent = SacAgent(state_dim, action_dim, low, high, rng=np.random.default_rng(0),
                     hidden_sizes=hidden)
    agent.policy.net.load_params(policy.params())
    return agent, env_name, horizon


def _sample_minibatch(trajs, size, rng):
    idx = rng.integers(0, len(trajs), size=size)
    return [trajs[i] for i in idx]


def run_seed(cfg: ExperimentConfig, seed: int, output_dir=None, progress=None) -> RunRecord:
    """Train one seed. Writes CSV artifacts under ``output_dir`` when given."""
    t0 = time.perf_counter()
    rngs = {name: substream(seed, name) for name in STREAMS}
    env = make_env(cfg.environment, horizon=cfg.horizon, episodic=True)
    spec = env.spec
    agent = SacAgent(spec.state_dim, spec.action_dim, spec.action_low, spec.action_high,
                     rng=rngs["init"], hidden_sizes=cfg.network_hidden, gamma=cfg.gamma,
                     tau=cfg.polyak, learning_rate=cfg.learning_rate,
                     init_alpha=cfg.init_alpha, target_entropy=cfg.target_entropy)
    family = _MODEL_FAMILY.get(cfg.reward_mode)
    model = None
    if family is not None:
        model = RewardModel.create(family, spec.state_dim, spec.action_dim,
                                   hidden_sizes=cfg.reward_network_hidden, rng=rngs["init"],
                                   shared_noise=cfg.shared_noise)
    store_mode = _STORE_MODE[cfg.reward_mode]
    buffer = ReplayBuffer(cfg.buffer_size, spec.state_dim, spec.action_dim)
    trajs = deque()
    traj_transitions = 0
    record = RunRecord(config_hash(cfg), seed)
    dumped = []
    lo = np.asarray(spec.action_low)
    hi = np.asarray(spec.action_high)

    step = 0
    while step < cfg.total_env_steps:
        s = env.reset(int(rngs["env"].integers(2**63 - 1)))
        states, actions, next_states, inner, emitted = [], [], [], [], []
        finished = False
        while step < cfg.total_env_steps:
            if step < cfg.start_steps:
                a = rngs["explore"].uniform(lo, hi)
            else:
                a = select_action(agent, s, rng=rngs["sac"])
            res = env.step(a)
            states.append(s)
            actions.append(a)
            next_states.append(res.next_state)
            inner.append(res.inner_reward)
            emitted.append(res.reward)
            s = res.next_state
            step += 1
            if len(buffer) >= cfg.sac_batch_size:
                for _ in range(cfg.gradient_steps_per_env_step):
                    batch = buffer.sample(cfg.sac_batch_size, rngs["buffer"])
                    if model is not None and cfg.relabel_mode == "on_sample":
                        batch.rewards = redistribute(
                            model, np.concatenate([batch.states, batch.actions], axis=1))
                    sac_update(agent, batch, rngs["sac"])
            if step % cfg.eval_every == 0:
                mean, std = evaluate(agent, cfg.environment, cfg.horizon, cfg.eval_episodes)
                record.evaluations.append((step, mean, std))
                if progress:
                    progress(seed, step, mean)
            if res.terminated or res.truncated:
                finished = True
                break
        if not finished:
            break
        episode = Episode(np.array(states), np.array(actions), np.array(next_states),
                          np.array(inner), np.array(emitted), res.terminated)
        if model is not None:
            trajs.append(episode.trajectory)
            traj_transitions += len(episode)
            while traj_transitions > cfg.buffer_size and len(trajs) > 1:
                traj_transitions -= len(trajs.popleft())
            for _ in range(cfg.reward_updates_per_episode):
                mb = _sample_minibatch(trajs, cfg.reward_batch_size, rngs["reward_batch"])
                loss = train_step(model, mb, cfg.learning_rate, rngs["reward_noise"])
                record.loss_curve.append((model.update_index, loss,
                                          model.last_stats["mean_sigma"],
                                          model.last_stats["mean_abs_residual"]))
        stored = relabel_and_store(buffer, episode, model, store_mode)
        if output_dir is not None and cfg.dump_trajectories:
            dumped.append((episode.states, episode.actions, episode.inner_rewards,
                           episode.emitted_rewards, stored))

    record.wall_clock = time.perf_counter() - t0
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        record.output_dir = out
        (out / "eval.csv").write_text(record.eval_csv())
        (out / "config.yaml").write_text(dump_config(cfg))
        (out / "policy.ckpt").write_text(dumps_agent(agent, cfg.environment, cfg.horizon))
        if model is not None:
            (out / "reward_loss.csv").write_text(record.loss_csv())
            (out / "reward_model.ckpt").write_text(dumps_model(model))
        if cfg.dump_trajectories:
            write_trajectory_dump(out / "trajectories.csv", dumped)
    return record


def run_experiment(cfg: ExperimentConfig, output_dir=None, progress=None):
    """Run every seed in ``cfg.seeds``; returns one :class:`RunRecord` per seed.

    Artifacts go to ``<output_dir>/<config hash>/seed<k>/`` (``output_dir``
    defaults to ``cfg.output_dir``; pass ``False`` to write nothing).
    """
    base = cfg.output_dir if output_dir is None else output_dir
    records = []
    for seed in cfg.seeds:
        out = None if base is False else Path(base) / config_hash(cfg) / f"seed{seed}"
        records.append(run_seed(cfg, seed, out, progress))
    return records
