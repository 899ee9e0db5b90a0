"""Soft Actor-Critic on top of :mod:`lrr.nn`.

Twin critics with polyak-averaged targets, a tanh-squashed Gaussian policy
trained by the reparameterization trick, and a log-parameterized temperature
tuned toward ``target_entropy``. All gradients are written out by hand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import NumericError, ShapeError
from .reward_model import RewardModel, Trajectory, redistribute

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG2 = np.log(2.0)


class SacAgent:
    def __init__(self, state_dim, action_dim, action_low, action_high, rng,
                 hidden_sizes=(256, 256), gamma=0.99, tau=0.005, learning_rate=3e-4,
                 init_alpha=1.0, target_entropy=None):
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        low = np.asarray(action_low, dtype=float)
        high = np.asarray(action_high, dtype=float)
        self.action_center = (high + low) / 2.0
        self.action_scale = (high - low) / 2.0
        h = list(hidden_sizes)
        self.policy = nn.Optimized(nn.DenseNet([state_dim, *h, 2 * action_dim], rng=rng))
        self.q1 = nn.Optimized(nn.DenseNet([state_dim + action_dim, *h, 1], rng=rng))
        self.q2 = nn.Optimized(nn.DenseNet([state_dim + action_dim, *h, 1], rng=rng))
        self.q1_target = self.q1.net.copy()
        self.q2_target = self.q2.net.copy()
        self.log_alpha = np.array([np.log(init_alpha)])
        self.alpha_adam = nn.AdamState.for_params([self.log_alpha])
        self.gamma = float(gamma)
        self.tau = float(tau)
        self.learning_rate = float(learning_rate)
        self.target_entropy = -float(action_dim) if target_entropy is None else float(target_entropy)
        self.updates = 0

    @property
    def alpha(self):
        return float(np.exp(self.log_alpha[0]))


@dataclass
class PolicySample:
    actions: np.ndarray
    log_prob: np.ndarray
    u: np.ndarray
    squashed: np.ndarray
    std: np.ndarray
    eps: np.ndarray
    std_free: np.ndarray  # log-std not clamped
    cache: nn.ForwardCache


def _policy_sample(agent, states, eps):
    out, cache = nn.forward(agent.policy.net, states)
    out = np.atleast_2d(out)
    k = agent.action_dim
    mean, raw_log_std = out[:, :k], out[:, k:]
    log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
    std = np.exp(log_std)
    u = mean + std * eps
    y = np.tanh(u)
    actions = agent.action_center + agent.action_scale * y
    log1m_y2 = 2.0 * (_LOG2 - u - np.logaddexp(0.0, -2.0 * u))
    log_prob = np.sum(-0.5 * eps * eps - log_std - _HALF_LOG_2PI
                      - np.log(agent.action_scale) - log1m_y2, axis=1)
    free = (raw_log_std > LOG_STD_MIN) & (raw_log_std < LOG_STD_MAX)
    return PolicySample(actions, log_prob, u, y, std, eps, free, cache)


def select_action(agent: SacAgent, state, deterministic=False, rng=None):
    """Squashed action for one state; the tanh of the mean when deterministic."""
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (agent.state_dim,):
        raise ShapeError(f"state must have {agent.state_dim} entries")
    if deterministic:
        out, _ = nn.forward(agent.policy.net, state)
        return agent.action_center + agent.action_scale * np.tanh(out[:agent.action_dim])
    eps = rng.standard_normal((1, agent.action_dim))
    return _policy_sample(agent, state[None, :], eps).actions[0]


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self):
        return len(self.rewards)


def _q(net, states, actions):
    out, cache = nn.forward(net, np.concatenate([states, actions], axis=1))
    return out[:, 0], cache


def critic_target(agent, batch, eps_next):
    """Clipped double-Q soft target; terminal transitions do not bootstrap."""
    nxt = _policy_sample(agent, batch.next_states, eps_next)
    qt1, _ = _q(agent.q1_target, batch.next_states, nxt.actions)
    qt2, _ = _q(agent.q2_target, batch.next_states, nxt.actions)
    soft_v = np.minimum(qt1, qt2) - agent.alpha * nxt.log_prob
    return batch.rewards + agent.gamma * (1.0 - batch.dones) * soft_v


def critic_loss(agent, batch, eps_next):
    """``mean((Q1 - y)^2) + mean((Q2 - y)^2)`` and gradients for both critics."""
    y = critic_target(agent, batch, eps_next)
    n = len(batch)
    loss = 0.0
    grads = []
    for q in (agent.q1, agent.q2):
        pred, cache = _q(q.net, batch.states, batch.actions)
        err = pred - y
        loss += float(np.mean(err * err))
        gw, gb, _ = nn.backward(q.net, cache, (2.0 * err / n)[:, None])
        grads.append(nn.interleave(gw, gb))
    return loss, grads[0], grads[1]


def actor_loss(agent, states, eps):
    """``mean(alpha * log_pi - min(Q1, Q2))``, policy gradients and log-probs."""
    n = len(states)
    alpha = agent.alpha
    s = _policy_sample(agent, states, eps)
    q1, c1 = _q(agent.q1.net, states, s.actions)
    q2, c2 = _q(agent.q2.net, states, s.actions)
    first = q1 <= q2
    loss = float(np.mean(alpha * s.log_prob - np.where(first, q1, q2)))
    _, _, dx1 = nn.backward(agent.q1.net, c1, np.where(first, -1.0 / n, 0.0)[:, None])
    _, _, dx2 = nn.backward(agent.q2.net, c2, np.where(first, 0.0, -1.0 / n)[:, None])
    d_action = (dx1 + dx2)[:, agent.state_dim:]
    d_u = d_action * agent.action_scale * (1.0 - s.squashed**2) + (alpha / n) * 2.0 * s.squashed
    d_mean = d_u
    d_log_std = (d_u * s.std * s.eps - alpha / n) * s.std_free
    gw, gb, _ = nn.backward(agent.policy.net, s.cache, np.concatenate([d_mean, d_log_std], axis=1))
    return loss, nn.interleave(gw, gb), s.log_prob


def alpha_loss(agent, log_prob):
    """``-log_alpha * mean(log_pi + target_entropy)`` and its gradient."""
    m = float(np.mean(log_prob + agent.target_entropy))
    return -float(agent.log_alpha[0]) * m, np.array([-m])


def polyak_update(target: nn.DenseNet, online: nn.DenseNet, tau):
    """``target <- (1 - tau) * target + tau * online`` in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if target.layer_sizes != online.layer_sizes:
        raise ShapeError("target and online networks differ in shape")
    for t, o in zip(target.params(), online.params()):
        if tau == 1.0:
            t[...] = o
        else:
            t += tau * (o - t)  # leaves t bitwise unchanged when o == t
    target.mark_updated()
    return target


def sac_update(agent: SacAgent, batch: Batch, rng, learning_rate=None):
    """One critic, actor and temperature step followed by a target update.

    Returns ``(critic_loss, actor_loss, alpha_loss)``.
    """
    lr = agent.learning_rate if learning_rate is None else learning_rate
    n, k = len(batch), agent.action_dim
    eps_next = rng.standard_normal((n, k))
    eps = rng.standard_normal((n, k))

    c_loss, g1, g2 = critic_loss(agent, batch, eps_next)
    if not np.isfinite(c_loss):
        raise NumericError(f"non-finite critic loss at SAC update {agent.updates}")
    agent.q1.step(g1, lr)
    agent.q2.step(g2, lr)

    a_loss, gp, log_prob = actor_loss(agent, batch.states, eps)
    if not np.isfinite(a_loss):
        raise NumericError(f"non-finite actor loss at SAC update {agent.updates}")
    agent.policy.step(gp, lr)

    t_loss, g_alpha = alpha_loss(agent, log_prob)
    nn.adam_step([agent.log_alpha], [g_alpha], agent.alpha_adam, lr)

    polyak_update(agent.q1_target, agent.q1.net, agent.tau)
    polyak_update(agent.q2_target, agent.q2.net, agent.tau)
    agent.updates += 1
    return c_loss, a_loss, t_loss


class ReplayBuffer:
    """FIFO ring buffer of ``(s, a, r, s', done)`` transitions."""

    def __init__(self, capacity, state_dim, action_dim):
        self.capacity = int(capacity)
        self.states = np.zeros((self.capacity, state_dim))
        self.actions = np.zeros((self.capacity, action_dim))
        self.rewards = np.zeros(self.capacity)
        self.next_states = np.zeros((self.capacity, state_dim))
        self.dones = np.zeros(self.capacity)
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def add(self, state, action, reward, next_state, done):
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size, rng) -> Batch:
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} < batch size {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.dones[idx])


@dataclass
class Episode:
    """A finished rollout with both the dense and the emitted reward streams."""

    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    inner_rewards: np.ndarray
    emitted_rewards: np.ndarray
    terminated: bool

    def __len__(self):
        return len(self.states)

    @property
    def trajectory(self) -> Trajectory:
        return Trajectory(self.states, self.actions, float(np.sum(self.inner_rewards)))


def relabel_and_store(buffer: ReplayBuffer, episode: Episode, model: RewardModel | None,
                      mode="lrr"):
    """Push an episode's transitions with rewards chosen by ``mode``.

    ``lrr``: the reward model's mean at each step; ``sparse``: the emitted
    episodic rewards; ``oracle``: the environment's dense rewards. Returns the
    stored rewards.
    """
    if mode == "lrr":
        rewards = redistribute(model, episode.trajectory)
    elif mode == "sparse":
        rewards = episode.emitted_rewards
    elif mode == "oracle":
        rewards = episode.inner_rewards
    else:
        raise ValueError(f"unknown relabel mode {mode!r}")
    T = len(episode)
    for t in range(T):
        done = episode.terminated and t == T - 1
        buffer.add(episode.states[t], episode.actions[t], rewards[t],
                   episode.next_states[t], done)
    return np.asarray(rewards, dtype=np.float64).copy()
